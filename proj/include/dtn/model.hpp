#pragma once

#include <optional>
#include <span>
#include <vector>

#include "dtn/embedding.hpp"
#include "dtn/mpo_layer.hpp"
#include "dtn/mps_head.hpp"
#include "dtn/tape.hpp"

namespace dtn {

// A stack of MPO layers over embedded scalar sequences, finished either by
// the scalar decoder (sequence-to-sequence) or by an MPS classification
// head (sequence-to-logits).
struct DeepTensorNetwork {
  std::size_t phys_dim = 2;
  std::vector<MpoLayer> layers;
  std::optional<MpsHead> head;
};

// Parameter nodes for the whole network, bound in a fixed order: each
// layer's cores then its boundary, then the head's cores, class tensor and
// boundary. parameters() walks the same order, so optimizer state, tape
// gradients and checkpoints all agree on parameter index i.
struct NetBinding {
  std::vector<MpoBinding> layers;
  std::optional<MpsHeadBinding> head;
};

NetBinding bind_net(Tape& tape, const DeepTensorNetwork& net);
std::vector<Tensor*> parameters(DeepTensorNetwork& net);
std::size_t num_parameters(const DeepTensorNetwork& net);

// Feature sequence after all MPO layers.
std::vector<NodeId> net_hidden(Tape& tape, const DeepTensorNetwork& net,
                               const NetBinding& bind,
                               std::vector<NodeId> phi);

// Classification graph (requires a head).
NodeId net_logits(Tape& tape, const DeepTensorNetwork& net,
                  const NetBinding& bind, std::span<const double> xs);

// Sequence graph: per-site decoded scalars (requires no head).
std::vector<NodeId> net_decoded(Tape& tape, const DeepTensorNetwork& net,
                                const NetBinding& bind,
                                std::span<const double> xs);

// Value-only evaluation built on a scratch tape.
std::vector<double> predict_logits(const DeepTensorNetwork& net,
                                   std::span<const double> xs);
std::size_t predict_class(const DeepTensorNetwork& net,
                          std::span<const double> xs);
std::vector<double> predict_sequence(const DeepTensorNetwork& net,
                                     std::span<const double> xs);

// Mean of the member logits.
std::vector<double> ensemble_logits(std::span<const DeepTensorNetwork> nets,
                                    std::span<const double> xs);

}  // namespace dtn
