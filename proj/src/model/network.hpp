#pragma once

#include <vector>

#include "ultraclean/model.hpp"

namespace ultraclean::detail {

// Forward/backward buffers for one sample. Convolutions run on zero-padded
// planar inputs and write "wide" output planes whose rows share the padded
// stride; the two trailing columns of each wide row are scratch and never read.
class Network {
 public:
  explicit Network(const Architecture& arch);

  void forward(const ModelParams& params, const Image& img);

  // Backpropagates from d(loss)/d(logits) or, when `from_features` is set,
  // from d(loss)/d(features). Parameter gradients are added into `grads` when
  // non-null; the input gradient is written to `input_grad` when non-null.
  void backward(const ModelParams& params, const std::vector<float>& upstream, bool from_features,
                ParamGradients* grads, Image* input_grad);

  const std::vector<float>& logits() const noexcept { return logits_; }
  const std::vector<float>& features() const noexcept { return feat_; }

 private:
  Architecture arch_;
  std::size_t h1_, w1_, s1_;  // conv1 output size and padded stride
  std::size_t h2_, w2_, s2_;  // conv2 output size and padded stride
  std::size_t h4_, w4_;       // feature map size
  std::size_t len1_, len2_;   // axpy span of a wide conv plane

  std::vector<float> in_pad_;    // [C][(h1+2) * s1]
  std::vector<float> z1_;        // [8][h1 * s1]
  std::vector<float> in2_pad_;   // [8][(h2+2) * s2]
  std::vector<std::size_t> arg1_;
  std::vector<float> z2_;        // [16][h2 * s2]
  std::vector<std::size_t> arg2_;
  std::vector<float> feat_;
  std::vector<float> logits_;

  std::vector<float> g_feat_;
  std::vector<float> g_z2_;
  std::vector<float> g_in2_pad_;
  std::vector<float> g_z1_;
  std::vector<float> g_in_pad_;

  std::size_t plane1() const noexcept { return (h1_ + 2) * s1_; }
  std::size_t plane2() const noexcept { return (h2_ + 2) * s2_; }
};

}  // namespace ultraclean::detail
