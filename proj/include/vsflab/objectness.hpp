#pragma once

#include <complex>
#include <vector>

#include "vsflab/boxes.hpp"
#include "vsflab/image.hpp"
#include "vsflab/tensor.hpp"

namespace vsflab {

// Generic-object evidence measures for one box of a grayscale image. Every
// scalar lies in [0,1]; the HOG descriptor is block-L2-normalized. Boxes
// must lie inside the image with positive area.
struct ObjectnessScores {
  double ms = 0;  // multiscale spectral-residual saliency inside the box
  double cc = 0;  // intensity-histogram contrast against the surrounding ring
  double ed = 0;  // edge density in the box's inner ring
  double ss = 0;  // superpixel straddling
  std::vector<double> hog;
};

// In-place radix-2 FFT; the length must be a power of two. The inverse
// transform includes the 1/n scaling.
void fft_radix2(std::vector<std::complex<double>>& a, bool inverse);

// Combined spectral-residual saliency map at analysis scales 64/32/16,
// resampled to the image extent and normalized to [0,1] by its maximum.
Tensor spectral_saliency(const GrayImage& img);

// Felzenszwalb graph segmentation on the 8-connected pixel grid with
// threshold scale `k` and a minimum component size; returns one label per
// pixel in row-major order, labels compacted in scan order.
std::vector<int> felzenszwalb_segments(const GrayImage& img, double k,
                                       int min_size);

double ms_score(const GrayImage& img, const BoxI& box);
double cc_score(const GrayImage& img, const BoxI& box);
double ed_score(const GrayImage& img, const BoxI& box);
double ss_score(const GrayImage& img, const BoxI& box);

// 9 unsigned orientation bins, 8x8-pixel cells over the box, 2x2-cell blocks
// with plain L2 normalization (cells normalized individually when the box
// spans fewer than 2 cells in either direction). Errors when the box is
// smaller than one cell.
std::vector<double> hog_descriptor(const GrayImage& img, const BoxI& box);

ObjectnessScores objectness_scores(const GrayImage& img, const BoxI& box);

}  // namespace vsflab
