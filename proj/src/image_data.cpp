#include "dtn/image_data.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <fstream>
#include <stdexcept>
#include <string>

#include "dtn/rng.hpp"

namespace dtn {

namespace {

constexpr std::uint32_t kImageMagic = 2051;  // u8 data, rank 3
constexpr std::uint32_t kLabelMagic = 2049;  // u8 data, rank 1

std::uint32_t read_be32(std::istream& in, const char* what) {
  unsigned char b[4];
  if (!in.read(reinterpret_cast<char*>(b), 4))
    throw std::runtime_error(std::string(what) + ": truncated header");
  return (std::uint32_t{b[0]} << 24) | (std::uint32_t{b[1]} << 16) |
         (std::uint32_t{b[2]} << 8) | std::uint32_t{b[3]};
}

void write_be32(std::ostream& out, std::uint32_t v) {
  const unsigned char b[4] = {static_cast<unsigned char>(v >> 24),
                              static_cast<unsigned char>(v >> 16),
                              static_cast<unsigned char>(v >> 8),
                              static_cast<unsigned char>(v)};
  out.write(reinterpret_cast<const char*>(b), 4);
}

}  // namespace

ImageDataset load_idx(const std::string& images_path,
                      const std::string& labels_path) {
  std::ifstream imgs(images_path, std::ios::binary);
  if (!imgs)
    throw std::runtime_error("load_idx: cannot open " + images_path);
  if (read_be32(imgs, "images") != kImageMagic)
    throw std::runtime_error("load_idx: bad image magic in " + images_path);
  ImageDataset data;
  data.count = read_be32(imgs, "images");
  data.rows = read_be32(imgs, "images");
  data.cols = read_be32(imgs, "images");
  data.pixels.resize(data.count * data.rows * data.cols);
  if (!imgs.read(reinterpret_cast<char*>(data.pixels.data()),
                 static_cast<std::streamsize>(data.pixels.size())))
    throw std::runtime_error("load_idx: truncated image data in " +
                             images_path);

  std::ifstream labs(labels_path, std::ios::binary);
  if (!labs)
    throw std::runtime_error("load_idx: cannot open " + labels_path);
  if (read_be32(labs, "labels") != kLabelMagic)
    throw std::runtime_error("load_idx: bad label magic in " + labels_path);
  const std::uint32_t n = read_be32(labs, "labels");
  if (n != data.count)
    throw std::runtime_error("load_idx: image/label count mismatch");
  data.labels.resize(n);
  if (!labs.read(reinterpret_cast<char*>(data.labels.data()),
                 static_cast<std::streamsize>(n)))
    throw std::runtime_error("load_idx: truncated label data in " +
                             labels_path);
  return data;
}

void save_idx(const std::string& images_path, const std::string& labels_path,
              const ImageDataset& data) {
  std::ofstream imgs(images_path, std::ios::binary);
  if (!imgs)
    throw std::runtime_error("save_idx: cannot open " + images_path);
  write_be32(imgs, kImageMagic);
  write_be32(imgs, static_cast<std::uint32_t>(data.count));
  write_be32(imgs, static_cast<std::uint32_t>(data.rows));
  write_be32(imgs, static_cast<std::uint32_t>(data.cols));
  imgs.write(reinterpret_cast<const char*>(data.pixels.data()),
             static_cast<std::streamsize>(data.pixels.size()));
  if (!imgs) throw std::runtime_error("save_idx: write failed");

  std::ofstream labs(labels_path, std::ios::binary);
  if (!labs)
    throw std::runtime_error("save_idx: cannot open " + labels_path);
  write_be32(labs, kLabelMagic);
  write_be32(labs, static_cast<std::uint32_t>(data.count));
  labs.write(reinterpret_cast<const char*>(data.labels.data()),
             static_cast<std::streamsize>(data.labels.size()));
  if (!labs) throw std::runtime_error("save_idx: write failed");
}

std::vector<double> resize_bilinear(std::span<const std::uint8_t> img,
                                    std::size_t rows, std::size_t cols,
                                    std::size_t new_rows,
                                    std::size_t new_cols) {
  if (img.size() != rows * cols)
    throw std::invalid_argument("resize_bilinear: size mismatch");
  if (rows == 0 || cols == 0 || new_rows == 0 || new_cols == 0)
    throw std::invalid_argument("resize_bilinear: zero dimension");
  std::vector<double> out(new_rows * new_cols);
  const double rscale = static_cast<double>(rows) / new_rows;
  const double cscale = static_cast<double>(cols) / new_cols;
  for (std::size_t r = 0; r < new_rows; ++r) {
    // Half-pixel centers: output center maps to src coordinate
    // (r + 0.5) * scale - 0.5, clamped to the valid range.
    double sr = (r + 0.5) * rscale - 0.5;
    sr = std::clamp(sr, 0.0, static_cast<double>(rows - 1));
    const std::size_t r0 = static_cast<std::size_t>(sr);
    const std::size_t r1 = std::min(r0 + 1, rows - 1);
    const double fr = sr - static_cast<double>(r0);
    for (std::size_t c = 0; c < new_cols; ++c) {
      double sc = (c + 0.5) * cscale - 0.5;
      sc = std::clamp(sc, 0.0, static_cast<double>(cols - 1));
      const std::size_t c0 = static_cast<std::size_t>(sc);
      const std::size_t c1 = std::min(c0 + 1, cols - 1);
      const double fc = sc - static_cast<double>(c0);
      const double v00 = img[r0 * cols + c0], v01 = img[r0 * cols + c1];
      const double v10 = img[r1 * cols + c0], v11 = img[r1 * cols + c1];
      out[r * new_cols + c] = (1.0 - fr) * ((1.0 - fc) * v00 + fc * v01) +
                              fr * ((1.0 - fc) * v10 + fc * v11);
    }
  }
  return out;
}

std::vector<double> image_to_sequence(const ImageDataset& data, std::size_t i,
                                      std::size_t target_rows,
                                      std::size_t target_cols) {
  if (i >= data.count)
    throw std::invalid_argument("image_to_sequence: index out of range");
  std::vector<double> px =
      resize_bilinear(data.image(i), data.rows, data.cols, target_rows,
                      target_cols);
  for (double& v : px) v /= 255.0;
  return px;
}

ImageDataset select_images(const ImageDataset& data,
                           std::span<const std::size_t> indices) {
  ImageDataset out;
  out.count = indices.size();
  out.rows = data.rows;
  out.cols = data.cols;
  out.pixels.reserve(indices.size() * data.rows * data.cols);
  out.labels.reserve(indices.size());
  for (std::size_t src : indices) {
    if (src >= data.count)
      throw std::invalid_argument("select_images: index out of range");
    const auto img = data.image(src);
    out.pixels.insert(out.pixels.end(), img.begin(), img.end());
    out.labels.push_back(data.labels[src]);
  }
  return out;
}

ImageDataset stratified_subset(const ImageDataset& data, std::size_t count,
                               std::uint64_t seed) {
  if (data.count == 0)
    throw std::invalid_argument("stratified_subset: empty dataset");
  std::uint8_t max_label = 0;
  for (std::uint8_t l : data.labels) max_label = std::max(max_label, l);
  const std::size_t n_classes = std::size_t{max_label} + 1;
  if (count % n_classes != 0)
    throw std::invalid_argument(
        "stratified_subset: count does not split evenly over classes");
  const std::size_t per_class = count / n_classes;

  std::vector<std::vector<std::size_t>> by_class(n_classes);
  const std::vector<std::size_t> order = permutation(data.count, seed);
  for (std::size_t i : order) by_class[data.labels[i]].push_back(i);

  std::vector<std::size_t> chosen;
  chosen.reserve(count);
  for (std::size_t c = 0; c < n_classes; ++c) {
    if (by_class[c].size() < per_class)
      throw std::invalid_argument("stratified_subset: class " +
                                  std::to_string(c) + " has only " +
                                  std::to_string(by_class[c].size()) +
                                  " images, need " +
                                  std::to_string(per_class));
    chosen.insert(chosen.end(), by_class[c].begin(),
                  by_class[c].begin() + static_cast<std::ptrdiff_t>(per_class));
  }
  return select_images(data, chosen);
}

ImageDataset resize_dataset(const ImageDataset& data, std::size_t new_rows,
                            std::size_t new_cols) {
  ImageDataset out;
  out.count = data.count;
  out.rows = new_rows;
  out.cols = new_cols;
  out.labels = data.labels;
  out.pixels.reserve(data.count * new_rows * new_cols);
  for (std::size_t i = 0; i < data.count; ++i) {
    const std::vector<double> px =
        resize_bilinear(data.image(i), data.rows, data.cols, new_rows,
                        new_cols);
    for (double v : px)
      out.pixels.push_back(
          static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L)));
  }
  return out;
}

ImageDataset crop_dataset(const ImageDataset& data, std::size_t crop_rows,
                          std::size_t crop_cols, bool centered,
                          std::uint64_t seed) {
  if (crop_rows > data.rows || crop_cols > data.cols)
    throw std::invalid_argument("crop_dataset: window larger than image");
  Rng rng(seed);
  ImageDataset out;
  out.count = data.count;
  out.rows = crop_rows;
  out.cols = crop_cols;
  out.labels = data.labels;
  out.pixels.reserve(data.count * crop_rows * crop_cols);
  for (std::size_t i = 0; i < data.count; ++i) {
    const std::size_t r_max = data.rows - crop_rows;
    const std::size_t c_max = data.cols - crop_cols;
    const std::size_t r0 = centered ? r_max / 2 : rng.below(r_max + 1);
    const std::size_t c0 = centered ? c_max / 2 : rng.below(c_max + 1);
    const auto img = data.image(i);
    for (std::size_t r = 0; r < crop_rows; ++r) {
      const std::uint8_t* row = img.data() + (r0 + r) * data.cols + c0;
      out.pixels.insert(out.pixels.end(), row, row + crop_cols);
    }
  }
  return out;
}

ImageDataset apply_permutation(const ImageDataset& data, std::uint64_t seed) {
  const std::vector<std::size_t> perm =
      permutation(data.rows * data.cols, seed);
  ImageDataset out;
  out.count = data.count;
  out.rows = data.rows;
  out.cols = data.cols;
  out.labels = data.labels;
  out.pixels.resize(data.pixels.size());
  const std::size_t n = data.rows * data.cols;
  for (std::size_t i = 0; i < data.count; ++i) {
    const std::uint8_t* src = data.pixels.data() + i * n;
    std::uint8_t* dst = out.pixels.data() + i * n;
    for (std::size_t p = 0; p < n; ++p) dst[p] = src[perm[p]];
  }
  return out;
}

ImageDataset subset(const ImageDataset& data, std::size_t offset,
                    std::size_t count, std::uint64_t seed) {
  if (offset + count > data.count)
    throw std::invalid_argument("subset: not enough images");
  const std::vector<std::size_t> order = permutation(data.count, seed);
  ImageDataset out;
  out.count = count;
  out.rows = data.rows;
  out.cols = data.cols;
  out.pixels.reserve(count * data.rows * data.cols);
  out.labels.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    const std::size_t src = order[offset + i];
    const auto img = data.image(src);
    out.pixels.insert(out.pixels.end(), img.begin(), img.end());
    out.labels.push_back(data.labels[src]);
  }
  return out;
}

}  // namespace dtn
