#include "kgx/tape.hpp"

#include <cmath>
#include <cstring>

namespace kgx {

namespace {

double stable_sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double stable_log_sigmoid(double x) {
  if (x >= 0.0) return -std::log1p(std::exp(-x));
  return x - std::log1p(std::exp(x));
}

// c[m x n] += a[m x k] * b[k x n]
void matmul_acc(double* c, const double* a, const double* b, std::size_t m, std::size_t k,
                std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    const double* ai = a + i * k;
    double* ci = c + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const double aip = ai[p];
      if (aip == 0.0) continue;
      const double* bp = b + p * n;
      for (std::size_t j = 0; j < n; ++j) ci[j] += aip * bp[j];
    }
  }
}

// c[m x k] += g[m x n] * b^T, b stored [k x n]
void matmul_acc_abt(double* c, const double* g, const double* b, std::size_t m, std::size_t n,
                    std::size_t k) {
  for (std::size_t i = 0; i < m; ++i) {
    const double* gi = g + i * n;
    double* ci = c + i * k;
    for (std::size_t l = 0; l < k; ++l) {
      const double* bl = b + l * n;
      double acc = 0.0;
      for (std::size_t j = 0; j < n; ++j) acc += gi[j] * bl[j];
      ci[l] += acc;
    }
  }
}

// c[k x n] += a^T * g, a stored [m x k], g stored [m x n]
void matmul_acc_atb(double* c, const double* a, const double* g, std::size_t m, std::size_t k,
                    std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    const double* ai = a + i * k;
    const double* gi = g + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const double aip = ai[p];
      if (aip == 0.0) continue;
      double* cp = c + p * n;
      for (std::size_t j = 0; j < n; ++j) cp[j] += aip * gi[j];
    }
  }
}

Tensor& ensure_grad(Tensor& slot, const Shape& shape) {
  if (slot.size() == 0 && shape_size(shape) != 0) slot = Tensor(shape);
  if (slot.shape() != shape) slot = Tensor(shape);
  return slot;
}

}  // namespace

void Tape::check_same_shape(const char* op, const Tensor& a, const Tensor& b) {
  if (!a.same_shape(b)) {
    throw ShapeError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) + " vs " +
                     shape_str(b.shape()));
  }
}

void Tape::check_complex(const char* op, const Tensor& t) {
  if (t.ndim() == 0 || t.shape().back() % 2 != 0) {
    throw ShapeError(std::string(op) + ": interleaved complex tensor needs an even last axis, got " +
                     shape_str(t.shape()));
  }
}

Tape::NodeId Tape::push(Node node) {
  nodes_.push_back(std::move(node));
  return static_cast<NodeId>(nodes_.size() - 1);
}

Tape::NodeId Tape::leaf(Tensor value) {
  Node n{.op = Op::kLeaf, .value = std::move(value)};
  n.needs_grad = true;
  return push(std::move(n));
}

Tape::NodeId Tape::constant(Tensor value) {
  Node n{.op = Op::kConstant, .value = std::move(value)};
  n.needs_grad = false;
  return push(std::move(n));
}

Tape::NodeId Tape::add(NodeId a, NodeId b) {
  check_same_shape("add", val(a), val(b));
  Tensor out = val(a);
  const auto& vb = val(b).data();
  auto d = out.data();
  for (std::size_t i = 0; i < d.size(); ++i) d[i] += vb[i];
  return push({.op = Op::kAdd, .a = a, .b = b, .value = std::move(out),
               .needs_grad = tracked(a) || tracked(b)});
}

Tape::NodeId Tape::sub(NodeId a, NodeId b) {
  check_same_shape("sub", val(a), val(b));
  Tensor out = val(a);
  const auto& vb = val(b).data();
  auto d = out.data();
  for (std::size_t i = 0; i < d.size(); ++i) d[i] -= vb[i];
  return push({.op = Op::kSub, .a = a, .b = b, .value = std::move(out),
               .needs_grad = tracked(a) || tracked(b)});
}

Tape::NodeId Tape::mul(NodeId a, NodeId b) {
  check_same_shape("mul", val(a), val(b));
  Tensor out = val(a);
  const auto& vb = val(b).data();
  auto d = out.data();
  for (std::size_t i = 0; i < d.size(); ++i) d[i] *= vb[i];
  return push({.op = Op::kMul, .a = a, .b = b, .value = std::move(out),
               .needs_grad = tracked(a) || tracked(b)});
}

Tape::NodeId Tape::matmul(NodeId a, NodeId b) {
  const Tensor& va = val(a);
  const Tensor& vb = val(b);
  if (va.ndim() != 2 || vb.ndim() != 2 || va.shape()[1] != vb.shape()[0]) {
    throw ShapeError("matmul: incompatible shapes " + shape_str(va.shape()) + " vs " +
                     shape_str(vb.shape()));
  }
  const std::size_t m = va.shape()[0], k = va.shape()[1], n = vb.shape()[1];
  Tensor out({m, n});
  matmul_acc(out.data().data(), va.data().data(), vb.data().data(), m, k, n);
  return push({.op = Op::kMatmul, .a = a, .b = b, .value = std::move(out),
               .needs_grad = tracked(a) || tracked(b)});
}

Tape::NodeId Tape::concat_rows(NodeId a, NodeId b) {
  const Tensor& va = val(a);
  const Tensor& vb = val(b);
  if (va.ndim() != 2 || vb.ndim() != 2 || va.shape()[1] != vb.shape()[1]) {
    throw ShapeError("concat_rows: incompatible shapes " + shape_str(va.shape()) + " vs " +
                     shape_str(vb.shape()));
  }
  Tensor out({va.shape()[0] + vb.shape()[0], va.shape()[1]});
  std::memcpy(out.data().data(), va.data().data(), va.size() * sizeof(double));
  std::memcpy(out.data().data() + va.size(), vb.data().data(), vb.size() * sizeof(double));
  return push({.op = Op::kConcatRows, .a = a, .b = b, .value = std::move(out),
               .needs_grad = tracked(a) || tracked(b)});
}

Tape::NodeId Tape::concat_rows(std::span<const NodeId> parts) {
  NodeId acc = kNone;
  for (NodeId p : parts) {
    if (val(p).size() == 0) continue;
    acc = (acc == kNone) ? p : concat_rows(acc, p);
  }
  if (acc == kNone) throw ShapeError("concat_rows: all parts empty");
  return acc;
}

Tape::NodeId Tape::concat_cols(NodeId a, NodeId b) {
  const Tensor& va = val(a);
  const Tensor& vb = val(b);
  if (va.ndim() != 2 || vb.ndim() != 2 || va.shape()[0] != vb.shape()[0]) {
    throw ShapeError("concat_cols: incompatible shapes " + shape_str(va.shape()) + " vs " +
                     shape_str(vb.shape()));
  }
  const std::size_t n = va.shape()[0], da = va.shape()[1], db = vb.shape()[1];
  Tensor out({n, da + db});
  for (std::size_t i = 0; i < n; ++i) {
    std::memcpy(out.row(i), va.row(i), da * sizeof(double));
    std::memcpy(out.row(i) + da, vb.row(i), db * sizeof(double));
  }
  return push({.op = Op::kConcatCols, .a = a, .b = b, .value = std::move(out),
               .needs_grad = tracked(a) || tracked(b)});
}

Tape::NodeId Tape::sum(NodeId a, int axis) {
  const Tensor& va = val(a);
  if (va.ndim() != 2) throw ShapeError("sum(axis): needs a 2-d tensor, got " + shape_str(va.shape()));
  const std::size_t n = va.shape()[0], d = va.shape()[1];
  if (axis == 0) {
    Tensor out({d});
    for (std::size_t i = 0; i < n; ++i) {
      const double* r = va.row(i);
      for (std::size_t j = 0; j < d; ++j) out[j] += r[j];
    }
    return push({.op = Op::kSum0, .a = a, .value = std::move(out), .needs_grad = tracked(a)});
  }
  if (axis == 1) {
    Tensor out({n});
    for (std::size_t i = 0; i < n; ++i) {
      const double* r = va.row(i);
      double acc = 0.0;
      for (std::size_t j = 0; j < d; ++j) acc += r[j];
      out[i] = acc;
    }
    return push({.op = Op::kSum1, .a = a, .value = std::move(out), .needs_grad = tracked(a)});
  }
  throw ShapeError("sum: axis must be 0 or 1");
}

Tape::NodeId Tape::mean(NodeId a, int axis) {
  const Tensor& va = val(a);
  if (va.ndim() != 2) throw ShapeError("mean(axis): needs a 2-d tensor, got " + shape_str(va.shape()));
  const std::size_t count = (axis == 0) ? va.shape()[0] : va.shape()[1];
  if (count == 0) throw ShapeError("mean: empty axis");
  NodeId s = sum(a, axis);
  Node& node = nodes_[s];
  node.op = (axis == 0) ? Op::kMean0 : Op::kMean1;
  for (double& x : node.value.data()) x /= static_cast<double>(count);
  return s;
}

Tape::NodeId Tape::sum_all(NodeId a) {
  const Tensor& va = val(a);
  double acc = 0.0;
  for (double x : va.data()) acc += x;
  return push({.op = Op::kSumAll, .a = a, .value = Tensor::scalar(acc), .needs_grad = tracked(a)});
}

Tape::NodeId Tape::mean_all(NodeId a) {
  const Tensor& va = val(a);
  if (va.size() == 0) throw ShapeError("mean_all: empty tensor");
  double acc = 0.0;
  for (double x : va.data()) acc += x;
  acc /= static_cast<double>(va.size());
  return push({.op = Op::kMeanAll, .a = a, .value = Tensor::scalar(acc), .needs_grad = tracked(a)});
}

Tape::NodeId Tape::gather(NodeId src, std::vector<std::uint32_t> rows) {
  const Tensor& vs = val(src);
  if (vs.ndim() != 2) throw ShapeError("gather: needs a 2-d source, got " + shape_str(vs.shape()));
  const std::size_t d = vs.shape()[1];
  Tensor out({rows.size(), d});
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i] >= vs.shape()[0]) {
      throw ShapeError("gather: row " + std::to_string(rows[i]) + " out of range for " +
                       shape_str(vs.shape()));
    }
    std::memcpy(out.row(i), vs.row(rows[i]), d * sizeof(double));
  }
  return push({.op = Op::kGather, .a = src, .value = std::move(out),
               .indices = std::move(rows), .needs_grad = tracked(src)});
}

Tape::NodeId Tape::scatter_mean(NodeId src, std::vector<std::uint32_t> groups,
                                std::size_t n_groups) {
  const Tensor& vs = val(src);
  if (vs.ndim() != 2) throw ShapeError("scatter_mean: needs a 2-d source");
  if (groups.size() != vs.shape()[0]) {
    throw ShapeError("scatter_mean: group list length " + std::to_string(groups.size()) +
                     " does not match row count " + std::to_string(vs.shape()[0]));
  }
  const std::size_t d = vs.shape()[1];
  Tensor out({n_groups, d});
  std::vector<std::uint32_t> counts(n_groups, 0);
  for (std::size_t i = 0; i < groups.size(); ++i) {
    if (groups[i] >= n_groups) throw ShapeError("scatter_mean: group id out of range");
    ++counts[groups[i]];
    double* o = out.row(groups[i]);
    const double* r = vs.row(i);
    for (std::size_t j = 0; j < d; ++j) o[j] += r[j];
  }
  for (std::size_t g = 0; g < n_groups; ++g) {
    if (counts[g] == 0) continue;
    double* o = out.row(g);
    const double inv = 1.0 / counts[g];
    for (std::size_t j = 0; j < d; ++j) o[j] *= inv;
  }
  return push({.op = Op::kScatterMean, .a = src, .value = std::move(out),
               .indices = std::move(groups), .groups = n_groups, .needs_grad = tracked(src)});
}

Tape::NodeId Tape::sigmoid(NodeId a) {
  Tensor out = val(a);
  for (double& x : out.data()) x = stable_sigmoid(x);
  return push({.op = Op::kSigmoid, .a = a, .value = std::move(out), .needs_grad = tracked(a)});
}

Tape::NodeId Tape::log_sigmoid(NodeId a) {
  Tensor out = val(a);
  for (double& x : out.data()) x = stable_log_sigmoid(x);
  return push({.op = Op::kLogSigmoid, .a = a, .value = std::move(out), .needs_grad = tracked(a)});
}

Tape::NodeId Tape::relu(NodeId a) {
  Tensor out = val(a);
  for (double& x : out.data()) x = (x > 0.0) ? x : 0.0;
  return push({.op = Op::kRelu, .a = a, .value = std::move(out), .needs_grad = tracked(a)});
}

Tape::NodeId Tape::log(NodeId a) {
  Tensor out = val(a);
  for (double& x : out.data()) {
    if (x <= 0.0) throw DomainError("log: non-positive input " + std::to_string(x));
    x = std::log(x);
  }
  return push({.op = Op::kLog, .a = a, .value = std::move(out), .needs_grad = tracked(a)});
}

Tape::NodeId Tape::softmax_rows(NodeId a) {
  const Tensor& va = val(a);
  if (va.ndim() != 1 && va.ndim() != 2) throw ShapeError("softmax_rows: needs a 1-d or 2-d tensor");
  Tensor out = va;
  const std::size_t n = out.rows(), d = out.cols();
  if (d == 0) throw ShapeError("softmax_rows: empty rows");
  for (std::size_t i = 0; i < n; ++i) {
    double* r = out.data().data() + i * d;
    double mx = r[0];
    for (std::size_t j = 1; j < d; ++j) mx = std::max(mx, r[j]);
    double denom = 0.0;
    for (std::size_t j = 0; j < d; ++j) {
      r[j] = std::exp(r[j] - mx);
      denom += r[j];
    }
    for (std::size_t j = 0; j < d; ++j) r[j] /= denom;
  }
  return push({.op = Op::kSoftmaxRows, .a = a, .value = std::move(out), .needs_grad = tracked(a)});
}

Tape::NodeId Tape::l1_norm_rows(NodeId a) {
  const Tensor& va = val(a);
  const std::size_t n = va.rows(), d = va.cols();
  Tensor out({n});
  for (std::size_t i = 0; i < n; ++i) {
    const double* r = va.data().data() + i * d;
    double acc = 0.0;
    for (std::size_t j = 0; j < d; ++j) acc += std::fabs(r[j]);
    out[i] = acc;
  }
  return push({.op = Op::kL1NormRows, .a = a, .value = std::move(out), .needs_grad = tracked(a)});
}

Tape::NodeId Tape::l2_norm_rows(NodeId a) {
  const Tensor& va = val(a);
  const std::size_t n = va.rows(), d = va.cols();
  Tensor out({n});
  for (std::size_t i = 0; i < n; ++i) {
    const double* r = va.data().data() + i * d;
    double acc = 0.0;
    for (std::size_t j = 0; j < d; ++j) acc += r[j] * r[j];
    out[i] = std::sqrt(acc);
  }
  return push({.op = Op::kL2NormRows, .a = a, .value = std::move(out), .needs_grad = tracked(a)});
}

Tape::NodeId Tape::complex_hadamard(NodeId a, NodeId b) {
  check_same_shape("complex_hadamard", val(a), val(b));
  check_complex("complex_hadamard", val(a));
  const auto& va = val(a).data();
  const auto& vb = val(b).data();
  Tensor out(val(a).shape());
  auto o = out.data();
  for (std::size_t i = 0; i < o.size(); i += 2) {
    o[i] = va[i] * vb[i] - va[i + 1] * vb[i + 1];
    o[i + 1] = va[i] * vb[i + 1] + va[i + 1] * vb[i];
  }
  return push({.op = Op::kComplexHadamard, .a = a, .b = b, .value = std::move(out),
               .needs_grad = tracked(a) || tracked(b)});
}

Tape::NodeId Tape::complex_conjugate(NodeId a) {
  check_complex("complex_conjugate", val(a));
  Tensor out = val(a);
  auto o = out.data();
  for (std::size_t i = 1; i < o.size(); i += 2) o[i] = -o[i];
  return push({.op = Op::kComplexConjugate, .a = a, .value = std::move(out),
               .needs_grad = tracked(a)});
}

Tape::NodeId Tape::complex_divide(NodeId a, NodeId b) {
  check_same_shape("complex_divide", val(a), val(b));
  check_complex("complex_divide", val(a));
  const auto& va = val(a).data();
  const auto& vb = val(b).data();
  Tensor out(val(a).shape());
  auto o = out.data();
  for (std::size_t i = 0; i < o.size(); i += 2) {
    const double denom = vb[i] * vb[i] + vb[i + 1] * vb[i + 1];
    if (denom == 0.0) throw DomainError("complex_divide: zero-modulus divisor coordinate");
    o[i] = (va[i] * vb[i] + va[i + 1] * vb[i + 1]) / denom;
    o[i + 1] = (va[i + 1] * vb[i] - va[i] * vb[i + 1]) / denom;
  }
  return push({.op = Op::kComplexDivide, .a = a, .b = b, .value = std::move(out),
               .needs_grad = tracked(a) || tracked(b)});
}

Tape::NodeId Tape::polar_unit(NodeId theta) {
  const Tensor& vt = val(theta);
  if (vt.ndim() == 0) throw ShapeError("polar_unit: needs at least one axis");
  Shape out_shape = vt.shape();
  out_shape.back() *= 2;
  Tensor out(std::move(out_shape));
  auto o = out.data();
  const auto& t = vt.data();
  for (std::size_t i = 0; i < t.size(); ++i) {
    o[2 * i] = std::cos(t[i]);
    o[2 * i + 1] = std::sin(t[i]);
  }
  return push({.op = Op::kPolarUnit, .a = theta, .value = std::move(out),
               .needs_grad = tracked(theta)});
}

Tape::NodeId Tape::scale(NodeId a, double c) {
  Tensor out = val(a);
  for (double& x : out.data()) x *= c;
  return push({.op = Op::kScale, .a = a, .value = std::move(out), .scalar = c,
               .needs_grad = tracked(a)});
}

Tape::NodeId Tape::add_scalar(NodeId a, double c) {
  Tensor out = val(a);
  for (double& x : out.data()) x += c;
  return push({.op = Op::kAddScalar, .a = a, .value = std::move(out), .scalar = c,
               .needs_grad = tracked(a)});
}

Tape::NodeId Tape::reshape(NodeId a, Shape shape) {
  const Tensor& va = val(a);
  if (shape_size(shape) != va.size()) {
    throw ShapeError("reshape: cannot view " + shape_str(va.shape()) + " as " + shape_str(shape));
  }
  Tensor out(std::move(shape), std::vector<double>(va.data().begin(), va.data().end()));
  return push({.op = Op::kReshape, .a = a, .value = std::move(out), .needs_grad = tracked(a)});
}

std::vector<Tensor> Tape::backward(NodeId loss) const {
  if (loss >= nodes_.size()) throw ContractError("backward: unknown node");
  if (!nodes_[loss].value.is_scalar()) {
    throw ContractError("backward: loss must be scalar, got shape " +
                        shape_str(nodes_[loss].value.shape()));
  }
  std::vector<Tensor> grads(nodes_.size());
  grads[loss] = Tensor::scalar(1.0);

  for (NodeId id = loss + 1; id-- > 0;) {
    const Node& node = nodes_[id];
    if (!node.needs_grad || grads[id].size() == 0) continue;
    const Tensor& g = grads[id];
    const auto gd = g.data();

    auto grad_into = [&](NodeId input) -> Tensor* {
      if (input == kNone || !tracked(input)) return nullptr;
      return &ensure_grad(grads[input], val(input).shape());
    };

    switch (node.op) {
      case Op::kLeaf:
      case Op::kConstant:
        break;
      case Op::kAdd: {
        if (Tensor* ga = grad_into(node.a)) {
          auto d = ga->data();
          for (std::size_t i = 0; i < d.size(); ++i) d[i] += gd[i];
        }
        if (Tensor* gb = grad_into(node.b)) {
          auto d = gb->data();
          for (std::size_t i = 0; i < d.size(); ++i) d[i] += gd[i];
        }
        break;
      }
      case Op::kSub: {
        if (Tensor* ga = grad_into(node.a)) {
          auto d = ga->data();
          for (std::size_t i = 0; i < d.size(); ++i) d[i] += gd[i];
        }
        if (Tensor* gb = grad_into(node.b)) {
          auto d = gb->data();
          for (std::size_t i = 0; i < d.size(); ++i) d[i] -= gd[i];
        }
        break;
      }
      case Op::kMul: {
        const auto va = val(node.a).data();
        const auto vb = val(node.b).data();
        if (Tensor* ga = grad_into(node.a)) {
          auto d = ga->data();
          for (std::size_t i = 0; i < d.size(); ++i) d[i] += gd[i] * vb[i];
        }
        if (Tensor* gb = grad_into(node.b)) {
          auto d = gb->data();
          for (std::size_t i = 0; i < d.size(); ++i) d[i] += gd[i] * va[i];
        }
        break;
      }
      case Op::kMatmul: {
        const Tensor& va = val(node.a);
        const Tensor& vb = val(node.b);
        const std::size_t m = va.shape()[0], k = va.shape()[1], n = vb.shape()[1];
        if (Tensor* ga = grad_into(node.a)) {
          matmul_acc_abt(ga->data().data(), gd.data(), vb.data().data(), m, n, k);
        }
        if (Tensor* gb = grad_into(node.b)) {
          matmul_acc_atb(gb->data().data(), va.data().data(), gd.data(), m, k, n);
        }
        break;
      }
      case Op::kConcatRows: {
        const std::size_t na = val(node.a).size();
        if (Tensor* ga = grad_into(node.a)) {
          auto d = ga->data();
          for (std::size_t i = 0; i < na; ++i) d[i] += gd[i];
        }
        if (Tensor* gb = grad_into(node.b)) {
          auto d = gb->data();
          for (std::size_t i = 0; i < d.size(); ++i) d[i] += gd[na + i];
        }
        break;
      }
      case Op::kConcatCols: {
        const Tensor& va = val(node.a);
        const std::size_t n = va.shape()[0], da = va.shape()[1];
        const std::size_t db = val(node.b).shape()[1];
        if (Tensor* ga = grad_into(node.a)) {
          for (std::size_t i = 0; i < n; ++i) {
            double* d = ga->row(i);
            const double* gi = gd.data() + i * (da + db);
            for (std::size_t j = 0; j < da; ++j) d[j] += gi[j];
          }
        }
        if (Tensor* gb = grad_into(node.b)) {
          for (std::size_t i = 0; i < n; ++i) {
            double* d = gb->row(i);
            const double* gi = gd.data() + i * (da + db) + da;
            for (std::size_t j = 0; j < db; ++j) d[j] += gi[j];
          }
        }
        break;
      }
      case Op::kSum0:
      case Op::kMean0: {
        if (Tensor* ga = grad_into(node.a)) {
          const std::size_t n = ga->shape()[0], d = ga->shape()[1];
          const double inv = (node.op == Op::kMean0) ? 1.0 / static_cast<double>(n) : 1.0;
          for (std::size_t i = 0; i < n; ++i) {
            double* r = ga->row(i);
            for (std::size_t j = 0; j < d; ++j) r[j] += gd[j] * inv;
          }
        }
        break;
      }
      case Op::kSum1:
      case Op::kMean1: {
        if (Tensor* ga = grad_into(node.a)) {
          const std::size_t n = ga->shape()[0], d = ga->shape()[1];
          const double inv = (node.op == Op::kMean1) ? 1.0 / static_cast<double>(d) : 1.0;
          for (std::size_t i = 0; i < n; ++i) {
            double* r = ga->row(i);
            const double gi = gd[i] * inv;
            for (std::size_t j = 0; j < d; ++j) r[j] += gi;
          }
        }
        break;
      }
      case Op::kSumAll:
      case Op::kMeanAll: {
        if (Tensor* ga = grad_into(node.a)) {
          auto d = ga->data();
          const double inv =
              (node.op == Op::kMeanAll) ? 1.0 / static_cast<double>(d.size()) : 1.0;
          const double gi = gd[0] * inv;
          for (std::size_t i = 0; i < d.size(); ++i) d[i] += gi;
        }
        break;
      }
      case Op::kGather: {
        if (Tensor* ga = grad_into(node.a)) {
          const std::size_t d = ga->shape()[1];
          for (std::size_t i = 0; i < node.indices.size(); ++i) {
            double* dst = ga->row(node.indices[i]);
            const double* src = gd.data() + i * d;
            for (std::size_t j = 0; j < d; ++j) dst[j] += src[j];
          }
        }
        break;
      }
      case Op::kScatterMean: {
        if (Tensor* ga = grad_into(node.a)) {
          std::vector<std::uint32_t> counts(node.groups, 0);
          for (std::uint32_t grp : node.indices) ++counts[grp];
          const std::size_t d = ga->shape()[1];
          for (std::size_t i = 0; i < node.indices.size(); ++i) {
            const std::uint32_t grp = node.indices[i];
            const double inv = 1.0 / counts[grp];
            double* dst = ga->row(i);
            const double* src = gd.data() + grp * d;
            for (std::size_t j = 0; j < d; ++j) dst[j] += src[j] * inv;
          }
        }
        break;
      }
      case Op::kSigmoid: {
        if (Tensor* ga = grad_into(node.a)) {
          auto d = ga->data();
          const auto y = node.value.data();
          for (std::size_t i = 0; i < d.size(); ++i) d[i] += gd[i] * y[i] * (1.0 - y[i]);
        }
        break;
      }
      case Op::kLogSigmoid: {
        if (Tensor* ga = grad_into(node.a)) {
          auto d = ga->data();
          const auto x = val(node.a).data();
          for (std::size_t i = 0; i < d.size(); ++i) d[i] += gd[i] * stable_sigmoid(-x[i]);
        }
        break;
      }
      case Op::kRelu: {
        if (Tensor* ga = grad_into(node.a)) {
          auto d = ga->data();
          const auto x = val(node.a).data();
          for (std::size_t i = 0; i < d.size(); ++i) {
            if (x[i] > 0.0) d[i] += gd[i];
          }
        }
        break;
      }
      case Op::kLog: {
        if (Tensor* ga = grad_into(node.a)) {
          auto d = ga->data();
          const auto x = val(node.a).data();
          for (std::size_t i = 0; i < d.size(); ++i) d[i] += gd[i] / x[i];
        }
        break;
      }
      case Op::kSoftmaxRows: {
        if (Tensor* ga = grad_into(node.a)) {
          const std::size_t n = node.value.rows(), d = node.value.cols();
          for (std::size_t i = 0; i < n; ++i) {
            const double* y = node.value.data().data() + i * d;
            const double* gi = gd.data() + i * d;
            double dot = 0.0;
            for (std::size_t j = 0; j < d; ++j) dot += gi[j] * y[j];
            double* dst = ga->data().data() + i * d;
            for (std::size_t j = 0; j < d; ++j) dst[j] += y[j] * (gi[j] - dot);
          }
        }
        break;
      }
      case Op::kL1NormRows: {
        if (Tensor* ga = grad_into(node.a)) {
          const Tensor& va = val(node.a);
          const std::size_t n = va.rows(), d = va.cols();
          for (std::size_t i = 0; i < n; ++i) {
            const double* x = va.data().data() + i * d;
            double* dst = ga->data().data() + i * d;
            for (std::size_t j = 0; j < d; ++j) {
              // subgradient 0 at x == 0
              if (x[j] > 0.0) dst[j] += gd[i];
              else if (x[j] < 0.0) dst[j] -= gd[i];
            }
          }
        }
        break;
      }
      case Op::kL2NormRows: {
        if (Tensor* ga = grad_into(node.a)) {
          const Tensor& va = val(node.a);
          const std::size_t n = va.rows(), d = va.cols();
          for (std::size_t i = 0; i < n; ++i) {
            const double norm = node.value[i];
            if (norm == 0.0) continue;
            const double* x = va.data().data() + i * d;
            double* dst = ga->data().data() + i * d;
            const double gi = gd[i] / norm;
            for (std::size_t j = 0; j < d; ++j) dst[j] += gi * x[j];
          }
        }
        break;
      }
      case Op::kComplexHadamard: {
        const auto va = val(node.a).data();
        const auto vb = val(node.b).data();
        if (Tensor* ga = grad_into(node.a)) {
          auto d = ga->data();
          for (std::size_t i = 0; i < d.size(); i += 2) {
            d[i] += gd[i] * vb[i] + gd[i + 1] * vb[i + 1];
            d[i + 1] += -gd[i] * vb[i + 1] + gd[i + 1] * vb[i];
          }
        }
        if (Tensor* gb = grad_into(node.b)) {
          auto d = gb->data();
          for (std::size_t i = 0; i < d.size(); i += 2) {
            d[i] += gd[i] * va[i] + gd[i + 1] * va[i + 1];
            d[i + 1] += -gd[i] * va[i + 1] + gd[i + 1] * va[i];
          }
        }
        break;
      }
      case Op::kComplexConjugate: {
        if (Tensor* ga = grad_into(node.a)) {
          auto d = ga->data();
          for (std::size_t i = 0; i < d.size(); i += 2) {
            d[i] += gd[i];
            d[i + 1] -= gd[i + 1];
          }
        }
        break;
      }
      case Op::kComplexDivide: {
        const auto vb = val(node.b).data();
        const auto out = node.value.data();
        if (Tensor* ga = grad_into(node.a)) {
          // grad_a = g * conj(1/b) = g * b / |b|^2
          auto d = ga->data();
          for (std::size_t i = 0; i < d.size(); i += 2) {
            const double denom = vb[i] * vb[i] + vb[i + 1] * vb[i + 1];
            d[i] += (gd[i] * vb[i] - gd[i + 1] * vb[i + 1]) / denom;
            d[i + 1] += (gd[i] * vb[i + 1] + gd[i + 1] * vb[i]) / denom;
          }
        }
        if (Tensor* gb = grad_into(node.b)) {
          // grad_b = -g * conj(out / b)
          auto d = gb->data();
          for (std::size_t i = 0; i < d.size(); i += 2) {
            const double denom = vb[i] * vb[i] + vb[i + 1] * vb[i + 1];
            // q = out / b
            const double qr = (out[i] * vb[i] + out[i + 1] * vb[i + 1]) / denom;
            const double qi = (out[i + 1] * vb[i] - out[i] * vb[i + 1]) / denom;
            d[i] -= gd[i] * qr + gd[i + 1] * qi;
            d[i + 1] -= -gd[i] * qi + gd[i + 1] * qr;
          }
        }
        break;
      }
      case Op::kPolarUnit: {
        if (Tensor* ga = grad_into(node.a)) {
          auto d = ga->data();
          const auto out = node.value.data();
          for (std::size_t i = 0; i < d.size(); ++i) {
            // out = (cos t, sin t)
            d[i] += -gd[2 * i] * out[2 * i + 1] + gd[2 * i + 1] * out[2 * i];
          }
        }
        break;
      }
      case Op::kScale: {
        if (Tensor* ga = grad_into(node.a)) {
          auto d = ga->data();
          for (std::size_t i = 0; i < d.size(); ++i) d[i] += gd[i] * node.scalar;
        }
        break;
      }
      case Op::kAddScalar:
      case Op::kReshape: {
        if (Tensor* ga = grad_into(node.a)) {
          auto d = ga->data();
          for (std::size_t i = 0; i < d.size(); ++i) d[i] += gd[i];
        }
        break;
      }
    }
  }

  // Leaves that never reach the loss still report zero gradients.
  for (NodeId id = 0; id < nodes_.size(); ++id) {
    if (nodes_[id].op == Op::kLeaf && grads[id].size() == 0) {
      grads[id] = Tensor(nodes_[id].value.shape());
    }
  }
  return grads;
}

}  // namespace kgx
