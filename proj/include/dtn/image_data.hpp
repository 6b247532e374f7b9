#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace dtn {

// A labeled set of single-channel byte images, matching the IDX container
// layout (rank-3 u8 image file + rank-1 u8 label file, big-endian headers).
struct ImageDataset {
  std::size_t count = 0;
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<std::uint8_t> pixels;  // count * rows * cols, row-major
  std::vector<std::uint8_t> labels;  // count

  std::span<const std::uint8_t> image(std::size_t i) const {
    return {pixels.data() + i * rows * cols, rows * cols};
  }
};

ImageDataset load_idx(const std::string& images_path,
                      const std::string& labels_path);
void save_idx(const std::string& images_path, const std::string& labels_path,
              const ImageDataset& data);

// Bilinear resampling with half-pixel centers and edge clamping.
std::vector<double> resize_bilinear(std::span<const std::uint8_t> img,
                                    std::size_t rows, std::size_t cols,
                                    std::size_t new_rows, std::size_t new_cols);

// One image as a scalar sequence in [0,1]: resample to target_rows x
// target_cols, divide by 255, flatten row-major.
std::vector<double> image_to_sequence(const ImageDataset& data, std::size_t i,
                                      std::size_t target_rows,
                                      std::size_t target_cols);

// The first `count` images under permutation(data.count, seed), starting at
// `offset` positions in. Used to carve train/test splits deterministically.
ImageDataset subset(const ImageDataset& data, std::size_t offset,
                    std::size_t count, std::uint64_t seed);

// The listed images, in order (duplicates allowed).
ImageDataset select_images(const ImageDataset& data,
                           std::span<const std::size_t> indices);

// Label-stratified draw: count is split evenly over the classes present
// (0..max label) and each class contributes its share under
// permutation(seed). Errors when a class has too few images or the split
// is uneven.
ImageDataset stratified_subset(const ImageDataset& data, std::size_t count,
                               std::uint64_t seed);

// Whole-dataset bilinear resize; resampled values are rounded back to bytes.
ImageDataset resize_dataset(const ImageDataset& data, std::size_t new_rows,
                            std::size_t new_cols);

// Cut a crop_rows x crop_cols window out of every image: centered, or at a
// per-image random offset drawn from `seed`. Errors when the window is
// larger than the image.
ImageDataset crop_dataset(const ImageDataset& data, std::size_t crop_rows,
                          std::size_t crop_cols, bool centered,
                          std::uint64_t seed);

// One pixel permutation drawn from `seed`, applied identically to every
// flattened image. Seed 0 is reserved as the identity.
ImageDataset apply_permutation(const ImageDataset& data, std::uint64_t seed);

}  // namespace dtn
