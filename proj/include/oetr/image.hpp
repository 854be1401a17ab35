#pragma once

#include <string>

#include "oetr/tensor.hpp"

// Binary PPM (P6, RGB) and PGM (P5, grayscale) image IO plus bilinear
// resampling. Images are [C,H,W] float tensors in [0,1]; 8-bit files round
// trip bit-exactly through that representation.
namespace oetr::img {

Tensor<float> load_image(const std::string& path);           // [3,H,W] or [1,H,W]
void save_image(const std::string& path, const Tensor<float>& image);

Tensor<float> decode_image(const std::string& bytes);
std::string encode_image(const Tensor<float>& image);

// Grayscale -> RGB by channel replication; RGB passes through.
Tensor<float> ensure_rgb(const Tensor<float>& image);

// Isotropic bilinear resize to (out_w, out_h); pixel-center sampling with
// edge clamping.
Tensor<float> resize_bilinear(const Tensor<float>& image, int out_w, int out_h);

// Resample the axis-aligned source window [x0, x0+w) x [y0, y0+h) (continuous
// pixel coordinates) to an out_w x out_h image.
Tensor<float> crop_resample(const Tensor<float>& image, double x0, double y0, double w, double h,
                            int out_w, int out_h);

}  // namespace oetr::img
