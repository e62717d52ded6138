#pragma once

#include <string>
#include <vector>

#include "gencnn/autodiff.hpp"

namespace gencnn {

/// One named parameter tensor with its AdaGrad accumulator. The leaf id is
/// the tensor's position in the owning ParameterSet's enumeration order.
struct Param {
  std::string name;
  Tensor value;
  Tensor accum;
  int leaf_id = -1;

  bool defined() const { return value.defined(); }
  Var use(Tape& tape) const { return tape.leaf(value, leaf_id); }
};

enum class GateMode { soft, hard };

/// Hybrid-shared convolution layer: Time-Flow weights are shared across all
/// locations, Time-Arrow weights are owned per location.
struct ConvLayerParams {
  int window = 0;     // k consecutive positions per unit
  int d_in = 0;       // input feature width
  int tf_maps = 0;    // shared feature maps (may be 0)
  int ta_maps = 0;    // location-dependent feature maps (may be 0)
  int locations = 0;  // output length L = L_in - window + 1
  Activation activation = Activation::relu;
  Param w_tf;  // [tf_maps x window*d_in]
  Param b_tf;  // [tf_maps]
  Param w_ta;  // [locations x ta_maps x window*d_in]
  Param b_ta;  // [locations x ta_maps]

  int maps() const { return tf_maps + ta_maps; }
  int seg_width() const { return window * d_in; }
};

struct ConvOut {
  Var feature_maps;  // [L x (tf_maps+ta_maps)], Time-Flow columns first
  Var segments;      // [L x window*d_in], the per-location convolution inputs
};

/// Gating layer over adjacent location pairs. The gate for window j reads the
/// concatenated convolution input segments of locations 2j-1 and 2j; Time-Flow
/// gates share weights across windows, Time-Arrow gates own one set per window.
struct GateLayerParams {
  int seg_width = 0;  // width of one convolution input segment
  int tf_maps = 0;
  int ta_maps = 0;
  int windows = 0;  // number of gated pairs J = floor(L/2)
  GateMode mode = GateMode::soft;
  Param w_tf;  // [tf_maps x 2*seg_width]
  Param b_tf;  // [tf_maps]
  Param w_ta;  // [windows x ta_maps x 2*seg_width]
  Param b_ta;  // [windows x ta_maps]
};

struct FCLayerParams {
  int d_in = 0;
  int d_out = 0;
  Activation activation = Activation::sigmoid;
  Param w;  // [d_out x d_in]
  Param b;  // [d_out]
};

/// input: [L_in x d_in] with L_in = locations + window - 1.
ConvOut conv_forward(Tape& tape, const ConvLayerParams& p, Var input);

/// feature_maps/segments from the paired convolution; returns [ceil(L/2) x F].
/// With odd L the final location passes through unchanged.
Var gate_forward(Tape& tape, const GateLayerParams& p, Var feature_maps, Var segments);

/// sigma(w * input + b) for a rank-1 input.
Var fc_forward(Tape& tape, const FCLayerParams& p, Var input);

}  // namespace gencnn
