#include "dtn/checkpoint.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace dtn {

namespace {

constexpr char kMagic[4] = {'D', 'T', 'N', 'C'};
constexpr std::uint32_t kVersion = 1;

void put_u8(std::ostream& out, std::uint8_t v) {
  out.put(static_cast<char>(v));
}

void put_u32(std::ostream& out, std::uint32_t v) {
  const unsigned char b[4] = {
      static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
      static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
  out.write(reinterpret_cast<const char*>(b), 4);
}

void put_f64(std::ostream& out, double v) {
  const std::uint64_t u = std::bit_cast<std::uint64_t>(v);
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(u >> (8 * i));
  out.write(reinterpret_cast<const char*>(b), 8);
}

std::uint8_t get_u8(std::istream& in) {
  const int c = in.get();
  if (c == EOF) throw std::runtime_error("checkpoint: truncated file");
  return static_cast<std::uint8_t>(c);
}

std::uint32_t get_u32(std::istream& in) {
  unsigned char b[4];
  if (!in.read(reinterpret_cast<char*>(b), 4))
    throw std::runtime_error("checkpoint: truncated file");
  return std::uint32_t{b[0]} | (std::uint32_t{b[1]} << 8) |
         (std::uint32_t{b[2]} << 16) | (std::uint32_t{b[3]} << 24);
}

double get_f64(std::istream& in) {
  unsigned char b[8];
  if (!in.read(reinterpret_cast<char*>(b), 8))
    throw std::runtime_error("checkpoint: truncated file");
  std::uint64_t u = 0;
  for (int i = 0; i < 8; ++i) u |= std::uint64_t{b[i]} << (8 * i);
  return std::bit_cast<double>(u);
}

void put_str(std::ostream& out, const std::string& s) {
  put_u32(out, static_cast<std::uint32_t>(s.size()));
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string get_str(std::istream& in) {
  const std::uint32_t len = get_u32(in);
  if (len > (1u << 20))
    throw std::runtime_error("checkpoint: unreasonable string length");
  std::string s(len, '\0');
  if (len && !in.read(s.data(), len))
    throw std::runtime_error("checkpoint: truncated file");
  return s;
}

// Every parameter blob is stored as (name, rank, dims, doubles); the names
// make the file self-describing for external tooling.
void put_tensor(std::ostream& out, const std::string& name, const Tensor& t) {
  put_str(out, name);
  put_u8(out, static_cast<std::uint8_t>(t.rank()));
  for (std::size_t i = 0; i < t.rank(); ++i)
    put_u32(out, static_cast<std::uint32_t>(t.shape()[i]));
  for (std::size_t i = 0; i < t.size(); ++i) put_f64(out, t[i]);
}

Tensor get_tensor(std::istream& in) {
  (void)get_str(in);  // name, informational
  const std::uint8_t rank = get_u8(in);
  if (rank > 4) throw std::runtime_error("checkpoint: tensor rank > 4");
  Shape s;
  s.rank = rank;
  for (std::uint8_t i = 0; i < rank; ++i) {
    s.dim[i] = get_u32(in);
    if (s.dim[i] == 0)
      throw std::runtime_error("checkpoint: zero tensor dimension");
  }
  Tensor t{s};
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = get_f64(in);
  return t;
}

}  // namespace

void save_checkpoint(const std::string& path, const DeepTensorNetwork& net,
                     const std::string& meta) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("save_checkpoint: cannot open " + path);
  out.write(kMagic, 4);
  put_u32(out, kVersion);
  put_str(out, meta);
  put_u32(out, static_cast<std::uint32_t>(net.phys_dim));
  put_u8(out, net.head ? 1 : 0);
  put_u32(out, static_cast<std::uint32_t>(net.layers.size()));
  std::size_t li = 0;
  for (const MpoLayer& layer : net.layers) {
    const std::string prefix = "layer" + std::to_string(li++) + ".";
    put_u32(out, static_cast<std::uint32_t>(layer.phys_dim));
    put_u32(out, static_cast<std::uint32_t>(layer.bond_dim));
    put_u32(out, static_cast<std::uint32_t>(layer.num_sites));
    put_u8(out, static_cast<std::uint8_t>(layer.opts.activation));
    put_u8(out, layer.opts.residual ? 1 : 0);
    put_u8(out, layer.opts.normalize_output ? 1 : 0);
    put_u8(out, layer.opts.normalize_contexts ? 1 : 0);
    put_u32(out, static_cast<std::uint32_t>(layer.cores.size()));
    for (std::size_t c = 0; c < layer.cores.size(); ++c)
      put_tensor(out, prefix + "core" + std::to_string(c), layer.cores[c]);
    put_tensor(out, prefix + "boundary", layer.boundary);
  }
  if (net.head) {
    const MpsHead& h = *net.head;
    put_u32(out, static_cast<std::uint32_t>(h.num_classes));
    put_u32(out, static_cast<std::uint32_t>(h.phys_dim));
    put_u32(out, static_cast<std::uint32_t>(h.bond_dim));
    put_u32(out, static_cast<std::uint32_t>(h.num_sites));
    put_u32(out, static_cast<std::uint32_t>(h.cores.size()));
    for (std::size_t c = 0; c < h.cores.size(); ++c)
      put_tensor(out, "head.core" + std::to_string(c), h.cores[c]);
    put_tensor(out, "head.class", h.class_tensor);
    put_tensor(out, "head.boundary", h.boundary);
  }
  if (!out) throw std::runtime_error("save_checkpoint: write failed");
}

DeepTensorNetwork load_checkpoint(const std::string& path, std::string* meta) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("load_checkpoint: cannot open " + path);
  char magic[4];
  if (!in.read(magic, 4) || std::memcmp(magic, kMagic, 4) != 0)
    throw std::runtime_error("load_checkpoint: not a DTNC file");
  if (get_u32(in) != kVersion)
    throw std::runtime_error("load_checkpoint: unsupported version");
  std::string m = get_str(in);
  if (meta) *meta = std::move(m);
  DeepTensorNetwork net;
  net.phys_dim = get_u32(in);
  const bool has_head = get_u8(in) != 0;
  const std::uint32_t n_layers = get_u32(in);
  net.layers.reserve(n_layers);
  for (std::uint32_t l = 0; l < n_layers; ++l) {
    MpoLayer layer;
    layer.phys_dim = get_u32(in);
    layer.bond_dim = get_u32(in);
    layer.num_sites = get_u32(in);
    const std::uint8_t act = get_u8(in);
    if (act > 2) throw std::runtime_error("load_checkpoint: bad activation");
    layer.opts.activation = static_cast<Activation>(act);
    layer.opts.residual = get_u8(in) != 0;
    layer.opts.normalize_output = get_u8(in) != 0;
    layer.opts.normalize_contexts = get_u8(in) != 0;
    const std::uint32_t n_cores = get_u32(in);
    layer.cores.reserve(n_cores);
    for (std::uint32_t c = 0; c < n_cores; ++c)
      layer.cores.push_back(get_tensor(in));
    layer.boundary = get_tensor(in);
    net.layers.push_back(std::move(layer));
  }
  if (has_head) {
    MpsHead h;
    h.num_classes = get_u32(in);
    h.phys_dim = get_u32(in);
    h.bond_dim = get_u32(in);
    h.num_sites = get_u32(in);
    const std::uint32_t n_cores = get_u32(in);
    h.cores.reserve(n_cores);
    for (std::uint32_t c = 0; c < n_cores; ++c)
      h.cores.push_back(get_tensor(in));
    h.class_tensor = get_tensor(in);
    h.boundary = get_tensor(in);
    net.head = std::move(h);
  }
  return net;
}

}  // namespace dtn
