#pragma once

#include <vector>

#include "ultraclean/image.hpp"

namespace ultraclean {

// Pixel-wise non-local means. sigma and h are in 0-255 pixel units; patch
// distances are computed on values scaled by 255 so those magnitudes apply.
struct NlmParams {
  int patch_radius = 3;
  int search_radius = 10;
  double sigma = 10.0;
  double h = 10.0;

  void validate() const;
};

struct MedianParams {
  int kernel_radius = 1;

  void validate() const;
};

// Both filters clamp every coordinate outside the image to the nearest edge
// pixel, patches and windows alike.
Image nlm_denoise(const Image& img, const NlmParams& params = {});
Image median_denoise(const Image& img, const MedianParams& params = {});

// Centered 2-D DFT magnitude |X| of the channel mean, DC bin at (H/2, W/2),
// returned row-major as H*W doubles.
std::vector<double> dft_magnitude(const Image& img);

// log(1 + |X|) of the centered spectrum, linearly rescaled to [0, 1]
// (all zeros if the spectrum is flat). Single-channel output.
Image dft_log_magnitude(const Image& img);

}  // namespace ultraclean
