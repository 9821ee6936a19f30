use crate::error::{Error, Result};

/// Floating-point storage width.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum FloatWidth {
    F32,
    F64,
}

impl FloatWidth {
    pub fn bytes(self) -> usize {
        match self {
            FloatWidth::F32 => 4,
            FloatWidth::F64 => 8,
        }
    }
}

/// Compute/accumulate width pair.
///
/// The narrow end of the policy (`f32` compute and accumulate) stands in for a
/// half-precision pipeline at desk scale: tensors are stored and combined at
/// the narrow width with no widening cast, which is what halves the lattice
/// memory in the transducer loss. `f64` everywhere is the reference. A mixed
/// policy keeps narrow storage but runs reductions at the wide width.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PrecisionPolicy {
    compute: FloatWidth,
    accumulate: FloatWidth,
}

impl PrecisionPolicy {
    /// Accumulating narrower than the operands is never allowed.
    pub fn new(compute: FloatWidth, accumulate: FloatWidth) -> Result<Self> {
        if accumulate < compute {
            return Err(Error::NarrowAccumulate { compute, accumulate });
        }
        Ok(PrecisionPolicy { compute, accumulate })
    }

    pub const fn f32() -> Self {
        PrecisionPolicy { compute: FloatWidth::F32, accumulate: FloatWidth::F32 }
    }

    pub const fn f64() -> Self {
        PrecisionPolicy { compute: FloatWidth::F64, accumulate: FloatWidth::F64 }
    }

    /// Narrow storage, wide reductions.
    pub const fn mixed() -> Self {
        PrecisionPolicy { compute: FloatWidth::F32, accumulate: FloatWidth::F64 }
    }

    pub fn compute(self) -> FloatWidth {
        self.compute
    }

    pub fn accumulate(self) -> FloatWidth {
        self.accumulate
    }
}

impl Default for PrecisionPolicy {
    fn default() -> Self {
        PrecisionPolicy::f32()
    }
}
