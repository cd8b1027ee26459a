#include "enmloc/diff/tape.hpp"

#include <string>

#include "enmloc/diff/kernels.hpp"
#include "enmloc/error.hpp"

namespace enmloc::diff {

void Tape::reset(std::size_t batch) {
  if (batch == 0) {
    throw InvalidArgument("tape batch must be positive");
  }
  batch_ = batch;
  count_ = 0;
  consumed_ = false;
}

Tape::Node& Tape::push(Op op, std::size_t width) {
  if (consumed_) {
    throw StateError("tape already consumed by backward()");
  }
  if (count_ == nodes_.size()) {
    nodes_.emplace_back();
  }
  Node& n = nodes_[count_++];
  n.op = op;
  n.a = n.b = 0;
  n.weight = n.bias = nullptr;
  n.requires_grad = false;
  n.track_point_grad = false;
  n.value.resize(width, batch_);
  return n;
}

const Tape::Node& Tape::node(NodeId id) const {
  if (id >= count_) {
    throw InvalidArgument("unknown tape node " + std::to_string(id));
  }
  return nodes_[id];
}

NodeId Tape::input(const Matrix& values, bool requires_grad) {
  if (values.cols() != batch_) {
    throw ShapeError("input batch " + std::to_string(values.cols()) + " != tape batch " +
                     std::to_string(batch_));
  }
  const NodeId id = input(values.rows(), requires_grad);
  std::copy(values.data(), values.data() + values.size(), nodes_[id].value.data());
  return id;
}

NodeId Tape::input(std::size_t width, bool requires_grad) {
  Node& n = push(Op::kInput, width);
  n.requires_grad = requires_grad;
  return count_ - 1;
}

Matrix& Tape::mutable_value(NodeId id) {
  node(id);
  return nodes_[id].value;
}

NodeId Tape::affine(ParamTensor& weight, ParamTensor* bias, NodeId x) {
  const std::size_t in = node(x).value.rows();
  const std::size_t out = weight.rows();
  if (weight.cols() != in) {
    throw ShapeError("affine: weight is " + std::to_string(out) + "x" +
                     std::to_string(weight.cols()) + " but input width is " + std::to_string(in));
  }
  if (bias != nullptr && (bias->rows() != out || bias->cols() != 1)) {
    throw ShapeError("affine: bias must be " + std::to_string(out) + "x1");
  }
  Node& n = push(Op::kAffine, out);
  n.a = x;
  n.weight = &weight;
  n.bias = bias;
  n.requires_grad = true;
  kernels::affine_forward(weight.value.data(), bias != nullptr ? bias->value.data() : nullptr, out,
                          in, nodes_[x].value.data(), n.value.data(), batch_);
  return count_ - 1;
}

NodeId Tape::relu(NodeId x) {
  const std::size_t w = node(x).value.rows();
  Node& n = push(Op::kRelu, w);
  n.a = x;
  n.requires_grad = nodes_[x].requires_grad;
  kernels::relu_forward(nodes_[x].value.data(), n.value.data(), n.value.size());
  return count_ - 1;
}

NodeId Tape::sigmoid(NodeId x) {
  const std::size_t w = node(x).value.rows();
  Node& n = push(Op::kSigmoid, w);
  n.a = x;
  n.requires_grad = nodes_[x].requires_grad;
  const double* src = nodes_[x].value.data();
  double* dst = n.value.data();
  for (std::size_t i = 0; i < n.value.size(); ++i) {
    dst[i] = kernels::sigmoid(src[i]);
  }
  return count_ - 1;
}

NodeId Tape::relu_mask(NodeId x, NodeId pre) {
  const std::size_t w = node(x).value.rows();
  if (node(pre).value.rows() != w) {
    throw ShapeError("relu_mask: width mismatch");
  }
  Node& n = push(Op::kReluMask, w);
  n.a = x;
  n.b = pre;
  n.requires_grad = nodes_[x].requires_grad;
  const double* src = nodes_[x].value.data();
  const double* gate = nodes_[pre].value.data();
  double* dst = n.value.data();
  for (std::size_t i = 0; i < n.value.size(); ++i) {
    dst[i] = gate[i] > 0.0 ? src[i] : 0.0;
  }
  return count_ - 1;
}

NodeId Tape::concat(NodeId a, NodeId b) {
  const std::size_t wa = node(a).value.rows();
  const std::size_t wb = node(b).value.rows();
  Node& n = push(Op::kConcat, wa + wb);
  n.a = a;
  n.b = b;
  n.requires_grad = nodes_[a].requires_grad || nodes_[b].requires_grad;
  std::copy(nodes_[a].value.data(), nodes_[a].value.data() + wa * batch_, n.value.data());
  std::copy(nodes_[b].value.data(), nodes_[b].value.data() + wb * batch_,
            n.value.data() + wa * batch_);
  return count_ - 1;
}

NodeId Tape::gather(ParamTensor& table, std::span<const GatherRow> rows, bool track_point_grad) {
  if (rows.size() != batch_) {
    throw ShapeError("gather: " + std::to_string(rows.size()) + " rows for batch " +
                     std::to_string(batch_));
  }
  const std::size_t width = table.cols();
  const std::size_t entries = table.rows();
  Node& n = push(Op::kGather, width);
  n.weight = &table;
  n.requires_grad = true;
  n.track_point_grad = track_point_grad;
  n.rows.assign(rows.begin(), rows.end());
  double* out = n.value.data();
  for (std::size_t s = 0; s < batch_; ++s) {
    const GatherRow& r = rows[s];
    for (std::size_t k = 0; k < 4; ++k) {
      if (r.index[k] >= entries) {
        throw OutOfBounds("gather: table index " + std::to_string(r.index[k]) + " >= " +
                          std::to_string(entries));
      }
    }
    for (std::size_t c = 0; c < width; ++c) {
      double acc = 0.0;
      for (std::size_t k = 0; k < 4; ++k) {
        acc += r.weight[k] * table.value(r.index[k], c);
      }
      out[c * batch_ + s] = acc;
    }
  }
  return count_ - 1;
}

const Matrix& Tape::value(NodeId id) const { return node(id).value; }

const Matrix& Tape::grad(NodeId id) const {
  const Node& n = node(id);
  if (!consumed_) {
    throw StateError("grad() requested before backward()");
  }
  if (!n.requires_grad) {
    throw StateError("node " + std::to_string(id) + " does not track gradients");
  }
  return n.grad;
}

const Matrix& Tape::point_grad(NodeId id) const {
  const Node& n = node(id);
  if (!consumed_ || n.op != Op::kGather || !n.track_point_grad) {
    throw StateError("no point gradient recorded for node " + std::to_string(id));
  }
  return n.point_grad;
}

void Tape::backward(NodeId node_id, const Matrix& output_grad) {
  const Seed seed{node_id, &output_grad};
  backward(std::span<const Seed>(&seed, 1));
}

void Tape::backward(NodeId node_id, double output_grad) {
  const Matrix& v = node(node_id).value;
  Matrix g(v.rows(), v.cols(), output_grad);
  backward(node_id, g);
}

void Tape::backward(std::span<const Seed> seeds) {
  if (consumed_) {
    throw StateError("backward() called twice on the same tape");
  }
  for (std::size_t i = 0; i < count_; ++i) {
    Node& n = nodes_[i];
    if (n.requires_grad) {
      n.grad.resize(n.value.rows(), n.value.cols());
      n.grad.fill(0.0);
    }
  }
  for (const Seed& s : seeds) {
    if (s.node >= count_) {
      throw InvalidArgument("seed refers to an unknown node");
    }
    Node& n = nodes_[s.node];
    if (s.grad->rows() != n.value.rows() || s.grad->cols() != n.value.cols()) {
      throw ShapeError("seed gradient shape does not match node value");
    }
    if (!n.requires_grad) {
      continue;
    }
    const double* src = s.grad->data();
    double* dst = n.grad.data();
    for (std::size_t i = 0; i < n.grad.size(); ++i) {
      dst[i] += src[i];
    }
  }
  consumed_ = true;
  for (std::size_t i = count_; i-- > 0;) {
    if (nodes_[i].requires_grad) {
      backward_node(nodes_[i]);
    }
  }
}

void Tape::backward_node(Node& n) {
  const std::size_t count = n.value.size();
  switch (n.op) {
    case Op::kInput:
      break;
    case Op::kAffine: {
      Node& x = nodes_[n.a];
      const std::size_t out = n.weight->rows();
      const std::size_t in = n.weight->cols();
      kernels::affine_backward_params(out, in, x.value.data(), n.grad.data(),
                                      n.weight->grad.data(),
                                      n.bias != nullptr ? n.bias->grad.data() : nullptr, batch_);
      if (x.requires_grad) {
        kernels::affine_backward_input(n.weight->value.data(), out, in, n.grad.data(),
                                       x.grad.data(), batch_);
      }
      break;
    }
    case Op::kRelu: {
      Node& x = nodes_[n.a];
      const double* xv = x.value.data();
      const double* g = n.grad.data();
      double* dx = x.grad.data();
      for (std::size_t i = 0; i < count; ++i) {
        dx[i] += xv[i] > 0.0 ? g[i] : 0.0;
      }
      break;
    }
    case Op::kSigmoid: {
      Node& x = nodes_[n.a];
      const double* y = n.value.data();
      const double* g = n.grad.data();
      double* dx = x.grad.data();
      for (std::size_t i = 0; i < count; ++i) {
        dx[i] += g[i] * y[i] * (1.0 - y[i]);
      }
      break;
    }
    case Op::kReluMask: {
      Node& x = nodes_[n.a];
      const double* gate = nodes_[n.b].value.data();
      const double* g = n.grad.data();
      double* dx = x.grad.data();
      for (std::size_t i = 0; i < count; ++i) {
        dx[i] += gate[i] > 0.0 ? g[i] : 0.0;
      }
      break;
    }
    case Op::kConcat: {
      Node& a = nodes_[n.a];
      Node& b = nodes_[n.b];
      const std::size_t na = a.value.size();
      const double* g = n.grad.data();
      if (a.requires_grad) {
        double* da = a.grad.data();
        for (std::size_t i = 0; i < na; ++i) {
          da[i] += g[i];
        }
      }
      if (b.requires_grad) {
        double* db = b.grad.data();
        for (std::size_t i = 0; i < b.value.size(); ++i) {
          db[i] += g[na + i];
        }
      }
      break;
    }
    case Op::kGather: {
      ParamTensor& table = *n.weight;
      const std::size_t width = table.cols();
      const double* g = n.grad.data();
      if (n.track_point_grad) {
        n.point_grad.resize(2, batch_);
        n.point_grad.fill(0.0);
      }
      for (std::size_t s = 0; s < batch_; ++s) {
        const GatherRow& r = n.rows[s];
        double gx = 0.0;
        double gy = 0.0;
        for (std::size_t k = 0; k < 4; ++k) {
          double* tg = table.grad.row(r.index[k]);
          const double* tv = table.value.row(r.index[k]);
          double proj = 0.0;
          for (std::size_t c = 0; c < width; ++c) {
            const double gc = g[c * batch_ + s];
            tg[c] += r.weight[k] * gc;
            proj += tv[c] * gc;
          }
          gx += r.dweight_dx[k] * proj;
          gy += r.dweight_dy[k] * proj;
        }
        if (n.track_point_grad) {
          n.point_grad(0, s) = gx;
          n.point_grad(1, s) = gy;
        }
      }
      break;
    }
  }
}

}  // namespace enmloc::diff
