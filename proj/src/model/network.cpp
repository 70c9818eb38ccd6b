#include "network.hpp"

#include <algorithm>

#include "ultraclean/error.hpp"
#include "ultraclean/simd.hpp"

namespace ultraclean::detail {

namespace {

constexpr std::size_t kC1 = Architecture::kConv1;
constexpr std::size_t kC2 = Architecture::kConv2;
constexpr std::size_t kK = Architecture::kKernel;

// Max-pool 2x2 of ReLU(z) from a wide plane into `out` at the given stride/offset.
// Records the flat z index of the winning element (first maximum).
void relu_pool(const float* z, std::size_t z_stride, std::size_t out_h, std::size_t out_w,
               float* out, std::size_t out_stride, std::size_t out_offset, std::size_t* arg) {
  for (std::size_t y = 0; y < out_h; ++y) {
    for (std::size_t x = 0; x < out_w; ++x) {
      std::size_t best = (2 * y) * z_stride + 2 * x;
      for (std::size_t dy = 0; dy < 2; ++dy) {
        for (std::size_t dx = 0; dx < 2; ++dx) {
          const std::size_t idx = (2 * y + dy) * z_stride + 2 * x + dx;
          if (z[idx] > z[best]) best = idx;
        }
      }
      arg[y * out_w + x] = best;
      out[out_offset + y * out_stride + x] = std::max(z[best], 0.0f);
    }
  }
}

}  // namespace

Network::Network(const Architecture& arch) : arch_(arch) {
  arch_.validate();
  h1_ = arch.height;
  w1_ = arch.width;
  s1_ = w1_ + 2;
  h2_ = h1_ / 2;
  w2_ = w1_ / 2;
  s2_ = w2_ + 2;
  h4_ = h2_ / 2;
  w4_ = w2_ / 2;
  len1_ = (h1_ - 1) * s1_ + w1_;
  len2_ = (h2_ - 1) * s2_ + w2_;

  in_pad_.assign(arch.channels * plane1(), 0.0f);
  z1_.assign(kC1 * h1_ * s1_, 0.0f);
  in2_pad_.assign(kC1 * plane2(), 0.0f);
  arg1_.assign(kC1 * h2_ * w2_, 0);
  z2_.assign(kC2 * h2_ * s2_, 0.0f);
  arg2_.assign(kC2 * h4_ * w4_, 0);
  feat_.assign(arch.feature_size(), 0.0f);
  logits_.assign(arch.num_classes, 0.0f);
}

void Network::forward(const ModelParams& params, const Image& img) {
  if (img.height() != arch_.height || img.width() != arch_.width ||
      img.channels() != arch_.channels) {
    throw ShapeError("input image " + std::to_string(img.height()) + "x" +
                     std::to_string(img.width()) + "x" + std::to_string(img.channels()) +
                     " does not match the model input shape");
  }
  const simd::Kernels& k = simd::kernels();
  const std::size_t channels = arch_.channels;

  for (std::size_t c = 0; c < channels; ++c) {
    float* plane = in_pad_.data() + c * plane1();
    for (std::size_t y = 0; y < h1_; ++y) {
      for (std::size_t x = 0; x < w1_; ++x) plane[(y + 1) * s1_ + x + 1] = img.at(y, x, c);
    }
  }

  const std::size_t wide1 = h1_ * s1_;
  for (std::size_t o = 0; o < kC1; ++o) {
    float* z = z1_.data() + o * wide1;
    std::fill(z, z + wide1, params.conv1_b[o]);
    for (std::size_t i = 0; i < channels; ++i) {
      const float* in = in_pad_.data() + i * plane1();
      const float* w = params.conv1_w.data() + (o * channels + i) * kK * kK;
      for (std::size_t ky = 0; ky < kK; ++ky) {
        for (std::size_t kx = 0; kx < kK; ++kx) {
          k.axpy(w[ky * kK + kx], in + ky * s1_ + kx, z, len1_);
        }
      }
    }
    relu_pool(z, s1_, h2_, w2_, in2_pad_.data() + o * plane2(), s2_, s2_ + 1,
              arg1_.data() + o * h2_ * w2_);
  }

  const std::size_t wide2 = h2_ * s2_;
  for (std::size_t o = 0; o < kC2; ++o) {
    float* z = z2_.data() + o * wide2;
    std::fill(z, z + wide2, params.conv2_b[o]);
    for (std::size_t i = 0; i < kC1; ++i) {
      const float* in = in2_pad_.data() + i * plane2();
      const float* w = params.conv2_w.data() + (o * kC1 + i) * kK * kK;
      for (std::size_t ky = 0; ky < kK; ++ky) {
        for (std::size_t kx = 0; kx < kK; ++kx) {
          k.axpy(w[ky * kK + kx], in + ky * s2_ + kx, z, len2_);
        }
      }
    }
    relu_pool(z, s2_, h4_, w4_, feat_.data() + o * h4_ * w4_, w4_, 0,
              arg2_.data() + o * h4_ * w4_);
  }

  const std::size_t f = feat_.size();
  for (std::size_t c = 0; c < arch_.num_classes; ++c) {
    logits_[c] = params.dense_b[c] + k.dot(params.dense_w.data() + c * f, feat_.data(), f);
  }
}

void Network::backward(const ModelParams& params, const std::vector<float>& upstream,
                       bool from_features, ParamGradients* grads, Image* input_grad) {
  const simd::Kernels& k = simd::kernels();
  const std::size_t f = feat_.size();
  const std::size_t channels = arch_.channels;

  if (from_features) {
    g_feat_ = upstream;
  } else {
    g_feat_.assign(f, 0.0f);
    for (std::size_t c = 0; c < arch_.num_classes; ++c) {
      const float g = upstream[c];
      if (g == 0.0f) continue;
      k.axpy(g, params.dense_w.data() + c * f, g_feat_.data(), f);
      if (grads) {
        k.axpy(g, feat_.data(), grads->tensors[4].data() + c * f, f);
        grads->tensors[5][c] += g;
      }
    }
  }

  // Pool2 + ReLU: route each feature gradient to its winning conv2 output.
  const std::size_t wide2 = h2_ * s2_;
  g_z2_.assign(kC2 * wide2, 0.0f);
  for (std::size_t o = 0; o < kC2; ++o) {
    for (std::size_t j = 0; j < h4_ * w4_; ++j) {
      const std::size_t idx = arg2_[o * h4_ * w4_ + j];
      if (z2_[o * wide2 + idx] > 0.0f) g_z2_[o * wide2 + idx] += g_feat_[o * h4_ * w4_ + j];
    }
  }

  g_in2_pad_.assign(kC1 * plane2(), 0.0f);
  for (std::size_t o = 0; o < kC2; ++o) {
    const float* g = g_z2_.data() + o * wide2;
    if (grads) {
      float bias = 0.0f;
      for (std::size_t j = 0; j < wide2; ++j) bias += g[j];
      grads->tensors[3][o] += bias;
    }
    for (std::size_t i = 0; i < kC1; ++i) {
      const float* in = in2_pad_.data() + i * plane2();
      const std::size_t wbase = (o * kC1 + i) * kK * kK;
      for (std::size_t ky = 0; ky < kK; ++ky) {
        for (std::size_t kx = 0; kx < kK; ++kx) {
          const std::size_t shift = ky * s2_ + kx;
          if (grads) grads->tensors[2][wbase + ky * kK + kx] += k.dot(g, in + shift, len2_);
          k.axpy(params.conv2_w[wbase + ky * kK + kx], g,
                 g_in2_pad_.data() + i * plane2() + shift, len2_);
        }
      }
    }
  }

  // Pool1 + ReLU.
  const std::size_t wide1 = h1_ * s1_;
  g_z1_.assign(kC1 * wide1, 0.0f);
  for (std::size_t o = 0; o < kC1; ++o) {
    for (std::size_t y = 0; y < h2_; ++y) {
      for (std::size_t x = 0; x < w2_; ++x) {
        const std::size_t idx = arg1_[o * h2_ * w2_ + y * w2_ + x];
        if (z1_[o * wide1 + idx] > 0.0f) {
          g_z1_[o * wide1 + idx] += g_in2_pad_[o * plane2() + (y + 1) * s2_ + x + 1];
        }
      }
    }
  }

  if (input_grad) g_in_pad_.assign(channels * plane1(), 0.0f);
  for (std::size_t o = 0; o < kC1; ++o) {
    const float* g = g_z1_.data() + o * wide1;
    if (grads) {
      float bias = 0.0f;
      for (std::size_t j = 0; j < wide1; ++j) bias += g[j];
      grads->tensors[1][o] += bias;
    }
    for (std::size_t i = 0; i < channels; ++i) {
      const float* in = in_pad_.data() + i * plane1();
      const std::size_t wbase = (o * channels + i) * kK * kK;
      for (std::size_t ky = 0; ky < kK; ++ky) {
        for (std::size_t kx = 0; kx < kK; ++kx) {
          const std::size_t shift = ky * s1_ + kx;
          if (grads) grads->tensors[0][wbase + ky * kK + kx] += k.dot(g, in + shift, len1_);
          if (input_grad) {
            k.axpy(params.conv1_w[wbase + ky * kK + kx], g,
                   g_in_pad_.data() + i * plane1() + shift, len1_);
          }
        }
      }
    }
  }

  if (input_grad) {
    *input_grad = Image(h1_, w1_, channels);
    for (std::size_t c = 0; c < channels; ++c) {
      const float* plane = g_in_pad_.data() + c * plane1();
      for (std::size_t y = 0; y < h1_; ++y) {
        for (std::size_t x = 0; x < w1_; ++x) input_grad->at(y, x, c) = plane[(y + 1) * s1_ + x + 1];
      }
    }
  }
}

}  // namespace ultraclean::detail
