#include "dtn/model.hpp"

#include <stdexcept>

namespace dtn {

NetBinding bind_net(Tape& tape, const DeepTensorNetwork& net) {
  NetBinding b;
  b.layers.reserve(net.layers.size());
  for (const MpoLayer& layer : net.layers)
    b.layers.push_back(bind_mpo(tape, layer));
  if (net.head) b.head = bind_mps_head(tape, *net.head);
  return b;
}

std::vector<Tensor*> parameters(DeepTensorNetwork& net) {
  std::vector<Tensor*> ps;
  for (MpoLayer& layer : net.layers) {
    for (Tensor& c : layer.cores) ps.push_back(&c);
    ps.push_back(&layer.boundary);
  }
  if (net.head) {
    for (Tensor& c : net.head->cores) ps.push_back(&c);
    ps.push_back(&net.head->class_tensor);
    ps.push_back(&net.head->boundary);
  }
  return ps;
}

std::size_t num_parameters(const DeepTensorNetwork& net) {
  std::size_t n = 0;
  for (const MpoLayer& layer : net.layers) {
    for (const Tensor& c : layer.cores) n += c.size();
    n += layer.boundary.size();
  }
  if (net.head) {
    for (const Tensor& c : net.head->cores) n += c.size();
    n += net.head->class_tensor.size();
    n += net.head->boundary.size();
  }
  return n;
}

std::vector<NodeId> net_hidden(Tape& tape, const DeepTensorNetwork& net,
                               const NetBinding& bind,
                               std::vector<NodeId> phi) {
  for (std::size_t l = 0; l < net.layers.size(); ++l)
    phi = mpo_forward_nodes(tape, net.layers[l], bind.layers[l], phi);
  return phi;
}

NodeId net_logits(Tape& tape, const DeepTensorNetwork& net,
                  const NetBinding& bind, std::span<const double> xs) {
  if (!net.head)
    throw std::invalid_argument("net_logits: network has no head");
  std::vector<NodeId> phi = embed_sequence_nodes(tape, xs);
  phi = net_hidden(tape, net, bind, std::move(phi));
  return mps_head_logits(tape, *net.head, *bind.head, phi);
}

std::vector<NodeId> net_decoded(Tape& tape, const DeepTensorNetwork& net,
                                const NetBinding& bind,
                                std::span<const double> xs) {
  if (net.head)
    throw std::invalid_argument(
        "net_decoded: network ends in a head, not the scalar decoder");
  std::vector<NodeId> phi = embed_sequence_nodes(tape, xs);
  phi = net_hidden(tape, net, bind, std::move(phi));
  std::vector<NodeId> out;
  out.reserve(phi.size());
  for (NodeId p : phi) out.push_back(decode_node(tape, p));
  return out;
}

std::vector<double> predict_logits(const DeepTensorNetwork& net,
                                   std::span<const double> xs) {
  Tape tape;
  NetBinding bind = bind_net(tape, net);
  NodeId logits = net_logits(tape, net, bind, xs);
  const Tensor& v = tape.val(logits);
  return std::vector<double>(v.data(), v.data() + v.size());
}

std::size_t predict_class(const DeepTensorNetwork& net,
                          std::span<const double> xs) {
  std::vector<double> logits = predict_logits(net, xs);
  std::size_t best = 0;
  for (std::size_t c = 1; c < logits.size(); ++c)
    if (logits[c] > logits[best]) best = c;
  return best;
}

std::vector<double> predict_sequence(const DeepTensorNetwork& net,
                                     std::span<const double> xs) {
  Tape tape;
  NetBinding bind = bind_net(tape, net);
  std::vector<NodeId> outs = net_decoded(tape, net, bind, xs);
  std::vector<double> ys;
  ys.reserve(outs.size());
  for (NodeId id : outs) ys.push_back(tape.scalar_val(id));
  return ys;
}

std::vector<double> ensemble_logits(std::span<const DeepTensorNetwork> nets,
                                    std::span<const double> xs) {
  if (nets.empty()) throw std::invalid_argument("ensemble_logits: no members");
  std::vector<double> mean = predict_logits(nets[0], xs);
  for (std::size_t i = 1; i < nets.size(); ++i) {
    std::vector<double> li = predict_logits(nets[i], xs);
    if (li.size() != mean.size())
      throw std::invalid_argument("ensemble_logits: class count mismatch");
    for (std::size_t c = 0; c < mean.size(); ++c) mean[c] += li[c];
  }
  for (double& m : mean) m /= static_cast<double>(nets.size());
  return mean;
}

}  // namespace dtn
