use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Per-sample MAC and element counts above this are rejected; keeps every
/// downstream cycle count comfortably inside `u64`.
pub(crate) const MAX_LAYER_WORK: u64 = 1 << 40;
const MAX_DIM: u64 = 1 << 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LayerKind {
    Conv,
    Fc,
}

impl LayerKind {
    pub fn as_str(self) -> &'static str {
        match self {
            LayerKind::Conv => "conv",
            LayerKind::Fc => "fc",
        }
    }
}

/// Shape statistics of one convolution or fully-connected layer.
///
/// For `Fc` layers `c_in`/`c_out` hold the input/output hidden sizes,
/// `kernel` is 1, `stride` is 0 and `feat` is the input feature length.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerDescriptor {
    pub index: usize,
    pub kind: LayerKind,
    pub c_in: u64,
    pub c_out: u64,
    pub kernel: u64,
    pub stride: u64,
    pub feat: u64,
    /// Weight count: `kernel²·c_in·c_out` (`kernel²·c_out` depthwise), `c_in·c_out` for fc.
    pub n_params: u64,
    pub is_depthwise: bool,
    /// Per-output-channel parameters stored alongside the weights
    /// (batch-norm scale/shift for conv, bias for fc). Zero unless the
    /// layer was declared with `affine`.
    pub affine_params: u64,
}

/// Work and traffic counts of one layer at a given batch size.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LayerStats {
    pub macs: u64,
    pub weight_bytes_fp32: u64,
    pub act_in_elems: u64,
    pub act_out_elems: u64,
}

impl LayerDescriptor {
    pub fn conv(
        index: usize,
        c_in: u64,
        c_out: u64,
        kernel: u64,
        stride: u64,
        feat: u64,
        depthwise: bool,
    ) -> Result<Self> {
        let mut layer = LayerDescriptor {
            index,
            kind: LayerKind::Conv,
            c_in,
            c_out,
            kernel,
            stride,
            feat,
            n_params: 0,
            is_depthwise: depthwise,
            affine_params: 0,
        };
        layer.check_shape()?;
        layer.n_params = layer.expected_params();
        Ok(layer)
    }

    pub fn fc(index: usize, h_in: u64, h_out: u64) -> Result<Self> {
        let mut layer = LayerDescriptor {
            index,
            kind: LayerKind::Fc,
            c_in: h_in,
            c_out: h_out,
            kernel: 1,
            stride: 0,
            feat: h_in,
            n_params: 0,
            is_depthwise: false,
            affine_params: 0,
        };
        layer.check_shape()?;
        layer.n_params = layer.expected_params();
        Ok(layer)
    }

    /// Marks the layer as carrying per-channel affine parameters.
    pub fn with_affine(mut self) -> Self {
        self.affine_params = match self.kind {
            LayerKind::Conv => 2 * self.c_out,
            LayerKind::Fc => self.c_out,
        };
        self
    }

    /// Input channels seen by each output channel.
    pub fn c_in_per_group(&self) -> u64 {
        if self.is_depthwise {
            1
        } else {
            self.c_in
        }
    }

    /// Output spatial size, `ceil(feat / stride)` (same padding). Fc layers report 1.
    pub fn out_feat(&self) -> u64 {
        match self.kind {
            LayerKind::Conv => self.feat.div_ceil(self.stride),
            LayerKind::Fc => 1,
        }
    }

    pub fn expected_params(&self) -> u64 {
        match self.kind {
            LayerKind::Conv => self.kernel * self.kernel * self.c_in_per_group() * self.c_out,
            LayerKind::Fc => self.c_in * self.c_out,
        }
    }

    /// Elements of one weight row (one output filter / one fc output unit).
    pub fn weight_row_len(&self) -> u64 {
        match self.kind {
            LayerKind::Conv => self.kernel * self.kernel * self.c_in_per_group(),
            LayerKind::Fc => self.c_in,
        }
    }

    /// Checks every descriptor invariant, including the stored parameter counts.
    pub fn validate(&self) -> Result<()> {
        self.check_shape()?;
        let expected = self.expected_params();
        if self.n_params != expected {
            return Err(self.invalid(format!("n_params {} does not match shape ({expected})", self.n_params)));
        }
        let affine_ok = self.affine_params == 0
            || self.affine_params
                == match self.kind {
                    LayerKind::Conv => 2 * self.c_out,
                    LayerKind::Fc => self.c_out,
                };
        if !affine_ok {
            return Err(self.invalid(format!("affine_params {} inconsistent with c_out", self.affine_params)));
        }
        Ok(())
    }

    fn invalid(&self, reason: String) -> Error {
        Error::InvalidLayer { index: self.index, reason }
    }

    fn check_shape(&self) -> Result<()> {
        for (name, value) in [("c_in", self.c_in), ("c_out", self.c_out), ("kernel", self.kernel), ("feat", self.feat)]
        {
            if value == 0 {
                return Err(self.invalid(format!("{name} must be positive")));
            }
            if value > MAX_DIM {
                return Err(self.invalid(format!("{name} = {value} exceeds {MAX_DIM}")));
            }
        }
        match self.kind {
            LayerKind::Conv => {
                if self.stride == 0 {
                    return Err(self.invalid("conv stride must be positive".into()));
                }
                if self.stride > self.feat {
                    return Err(self.invalid(format!("stride {} exceeds feature size {}", self.stride, self.feat)));
                }
                if self.is_depthwise && self.c_in != self.c_out {
                    return Err(self.invalid(format!(
                        "depthwise layer needs c_in == c_out (got {} and {})",
                        self.c_in, self.c_out
                    )));
                }
            }
            LayerKind::Fc => {
                if self.is_depthwise {
                    return Err(self.invalid("fc layer cannot be depthwise".into()));
                }
                if self.kernel != 1 || self.stride != 0 {
                    return Err(self.invalid("fc layer needs kernel = 1 and stride = 0".into()));
                }
                if self.feat != self.c_in {
                    return Err(
                        self.invalid(format!("fc feature length {} differs from h_in {}", self.feat, self.c_in))
                    );
                }
            }
        }
        // Work bound, checked without overflowing.
        let out = match self.kind {
            LayerKind::Conv => self.feat.div_ceil(self.stride),
            LayerKind::Fc => 1,
        };
        let cin_pg = if self.is_depthwise { 1 } else { self.c_in };
        let terms = [
            [out, out, self.kernel, self.kernel, cin_pg, self.c_out],
            [self.feat, self.feat, self.c_in, 1, 1, 1],
            [out, out, self.c_out, 1, 1, 1],
        ];
        for factors in terms {
            let product = factors.iter().try_fold(1u64, |acc, &f| acc.checked_mul(f).filter(|&p| p <= MAX_LAYER_WORK));
            if product.is_none() {
                return Err(self.invalid("layer work exceeds supported size".into()));
            }
        }
        Ok(())
    }

    /// MACs and element counts at `batch` (must be >= 1).
    pub fn stats(&self, batch: u64) -> LayerStats {
        debug_assert!(batch >= 1);
        let (macs, act_in, act_out) = match self.kind {
            LayerKind::Conv => {
                let out = self.out_feat();
                (
                    out * out * self.kernel * self.kernel * self.c_in_per_group() * self.c_out,
                    self.feat * self.feat * self.c_in,
                    out * out * self.c_out,
                )
            }
            LayerKind::Fc => (self.c_in * self.c_out, self.c_in, self.c_out),
        };
        LayerStats {
            macs: batch * macs,
            weight_bytes_fp32: 4 * self.n_params,
            act_in_elems: batch * act_in,
            act_out_elems: batch * act_out,
        }
    }
}
