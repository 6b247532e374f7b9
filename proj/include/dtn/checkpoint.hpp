#pragma once

#include <string>

#include "dtn/model.hpp"

namespace dtn {

// Binary network snapshot, magic "DTNC" version 1. Topology (layer options,
// dimensions, head geometry) and every parameter tensor are stored with
// fixed little-endian encoding and a name per tensor; doubles round-trip
// bit for bit. `meta` is an uninterpreted snapshot string (typically the
// run's configuration text and seed).
void save_checkpoint(const std::string& path, const DeepTensorNetwork& net,
                     const std::string& meta = "");
DeepTensorNetwork load_checkpoint(const std::string& path,
                                  std::string* meta = nullptr);

}  // namespace dtn
