#include "gencnn/layers.hpp"

#include <stdexcept>

namespace gencnn {

ConvOut conv_forward(Tape& tape, const ConvLayerParams& p, Var input) {
  const Tensor& x = tape.value(input);
  if (x.rank() != 2 || x.cols() != p.d_in) {
    throw std::invalid_argument("conv_forward: input " + x.shape_str() + " does not match d_in " +
                                std::to_string(p.d_in));
  }
  if (x.rows() - p.window + 1 != p.locations) {
    throw std::invalid_argument("conv_forward: layer expects " + std::to_string(p.locations) +
                                " locations but input " + x.shape_str() + " with window " +
                                std::to_string(p.window) + " yields " +
                                std::to_string(x.rows() - p.window + 1));
  }
  if (p.maps() <= 0) throw std::invalid_argument("conv_forward: layer has no feature maps");

  Var seg = tape.windows(input, p.window, 1);
  Var pre;
  if (p.tf_maps > 0 && p.ta_maps > 0) {
    Var tf = tape.linear_shared(seg, p.w_tf.use(tape), p.b_tf.use(tape));
    Var ta = tape.linear_per_loc(seg, p.w_ta.use(tape), p.b_ta.use(tape));
    pre = tape.concat_cols(tf, ta);
  } else if (p.tf_maps > 0) {
    pre = tape.linear_shared(seg, p.w_tf.use(tape), p.b_tf.use(tape));
  } else {
    pre = tape.linear_per_loc(seg, p.w_ta.use(tape), p.b_ta.use(tape));
  }
  return {tape.activation(pre, p.activation), seg};
}

Var gate_forward(Tape& tape, const GateLayerParams& p, Var feature_maps, Var segments) {
  const Tensor& fm = tape.value(feature_maps);
  const Tensor& seg = tape.value(segments);
  if (fm.rank() != 2 || fm.cols() != p.tf_maps + p.ta_maps) {
    throw std::invalid_argument("gate_forward: feature maps " + fm.shape_str() +
                                " do not match layer maps " + std::to_string(p.tf_maps + p.ta_maps));
  }
  if (seg.rank() != 2 || seg.rows() != fm.rows() || seg.cols() != p.seg_width) {
    throw std::invalid_argument("gate_forward: segments " + seg.shape_str() +
                                " do not match feature maps " + fm.shape_str() + " and width " +
                                std::to_string(p.seg_width));
  }
  int J = fm.rows() / 2;
  if (J != p.windows) {
    throw std::invalid_argument("gate_forward: layer expects " + std::to_string(p.windows) +
                                " windows, input yields " + std::to_string(J));
  }
  if (J == 0) return feature_maps;  // single unpaired location passes through

  Var gate_in = tape.windows(segments, 2, 2);  // [J x 2*seg_width]
  Var logits;
  if (p.tf_maps > 0 && p.ta_maps > 0) {
    Var tf = tape.linear_shared(gate_in, p.w_tf.use(tape), p.b_tf.use(tape));
    Var ta = tape.linear_per_loc(gate_in, p.w_ta.use(tape), p.b_ta.use(tape));
    logits = tape.concat_cols(tf, ta);
  } else if (p.tf_maps > 0) {
    logits = tape.linear_shared(gate_in, p.w_tf.use(tape), p.b_tf.use(tape));
  } else {
    logits = tape.linear_per_loc(gate_in, p.w_ta.use(tape), p.b_ta.use(tape));
  }
  Var g = tape.activation(logits, Activation::sigmoid);
  return tape.pair_combine(feature_maps, g, p.mode == GateMode::hard);
}

Var fc_forward(Tape& tape, const FCLayerParams& p, Var input) {
  const Tensor& x = tape.value(input);
  if (x.rank() != 1 || x.size() != p.d_in) {
    throw std::invalid_argument("fc_forward: input " + x.shape_str() + " does not match d_in " +
                                std::to_string(p.d_in));
  }
  Var pre = tape.affine(p.w.use(tape), input, p.b.use(tape));
  return tape.activation(pre, p.activation);
}

}  // namespace gencnn
