#include "kgx/adam.hpp"

#include <cmath>
#include <cstring>
#include <istream>
#include <ostream>

#include "kgx/error.hpp"

namespace kgx {

namespace {

constexpr char kMagic[8] = {'K', 'G', 'X', 'P', 'S', '0', '0', '1'};

void write_u64(std::ostream& out, std::uint64_t v) {
  unsigned char buf[8];
  for (int i = 0; i < 8; ++i) buf[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
  out.write(reinterpret_cast<const char*>(buf), 8);
}

std::uint64_t read_u64(std::istream& in) {
  unsigned char buf[8];
  in.read(reinterpret_cast<char*>(buf), 8);
  if (!in) throw IoError("parameter archive truncated");
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(buf[i]) << (8 * i);
  return v;
}

void write_doubles(std::ostream& out, std::span<const double> xs) {
  // Raw little-endian 64-bit floats; x86-64/aarch64 both qualify.
  static_assert(sizeof(double) == 8);
  out.write(reinterpret_cast<const char*>(xs.data()),
            static_cast<std::streamsize>(xs.size() * sizeof(double)));
}

void read_doubles(std::istream& in, std::span<double> xs) {
  in.read(reinterpret_cast<char*>(xs.data()),
          static_cast<std::streamsize>(xs.size() * sizeof(double)));
  if (!in) throw IoError("parameter archive truncated");
}

void write_tensor(std::ostream& out, const Tensor& t) {
  write_u64(out, t.ndim());
  for (std::size_t d : t.shape()) write_u64(out, d);
  write_doubles(out, t.data());
}

Tensor read_tensor(std::istream& in) {
  const std::uint64_t ndim = read_u64(in);
  if (ndim > 8) throw IoError("parameter archive corrupt: ndim " + std::to_string(ndim));
  Shape shape(ndim);
  for (auto& d : shape) d = read_u64(in);
  Tensor t(std::move(shape));
  read_doubles(in, t.data());
  return t;
}

}  // namespace

std::size_t ParameterStore::add(std::string name, Tensor init) {
  if (by_name_.contains(name)) throw ContractError("duplicate parameter name: " + name);
  by_name_.emplace(name, params_.size());
  names_.push_back(std::move(name));
  moment1_.emplace_back(init.shape());
  moment2_.emplace_back(init.shape());
  params_.push_back(std::move(init));
  return params_.size() - 1;
}

const Tensor& ParameterStore::value(const std::string& name) const {
  return params_[index_of(name)];
}

std::size_t ParameterStore::index_of(const std::string& name) const {
  auto it = by_name_.find(name);
  if (it == by_name_.end()) throw ContractError("unknown parameter: " + name);
  return it->second;
}

void ParameterStore::adam_step(const std::vector<Tensor>& grads, const AdamConfig& cfg,
                               double clip_norm) {
  if (grads.size() != params_.size()) {
    throw ContractError("adam_step: got " + std::to_string(grads.size()) + " gradients for " +
                        std::to_string(params_.size()) + " parameters");
  }
  for (std::size_t p = 0; p < params_.size(); ++p) {
    if (grads[p].size() == 0) continue;
    if (!grads[p].same_shape(params_[p])) {
      throw ShapeError("adam_step: gradient shape " + shape_str(grads[p].shape()) +
                       " does not match parameter " + names_[p]);
    }
    if (!grads[p].all_finite()) {
      throw ContractError("adam_step: non-finite gradient for parameter " + names_[p]);
    }
  }

  double scale = 1.0;
  if (clip_norm > 0.0) {
    double sq = 0.0;
    for (const Tensor& g : grads) {
      for (double x : g.data()) sq += x * x;
    }
    const double norm = std::sqrt(sq);
    if (norm > clip_norm) scale = clip_norm / norm;
  }

  ++step_;
  const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(step_));
  const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(step_));

  for (std::size_t p = 0; p < params_.size(); ++p) {
    if (grads[p].size() == 0) continue;
    Tensor& w = params_[p];
    Tensor& m = moment1_[p];
    Tensor& v = moment2_[p];
    const auto g = grads[p].data();
    const std::size_t ncols = w.ndim() >= 2 ? w.shape().back() : w.size();
    const std::size_t nrows = w.size() / std::max<std::size_t>(ncols, 1);
    for (std::size_t r = 0; r < nrows; ++r) {
      const std::size_t off = r * ncols;
      bool touched = false;
      for (std::size_t j = 0; j < ncols; ++j) {
        if (g[off + j] != 0.0) {
          touched = true;
          break;
        }
      }
      if (!touched) continue;
      for (std::size_t j = 0; j < ncols; ++j) {
        const double gj = g[off + j] * scale;
        m[off + j] = cfg.beta1 * m[off + j] + (1.0 - cfg.beta1) * gj;
        v[off + j] = cfg.beta2 * v[off + j] + (1.0 - cfg.beta2) * gj * gj;
        const double mhat = m[off + j] / bc1;
        const double vhat = v[off + j] / bc2;
        w[off + j] -= cfg.learning_rate * mhat / (std::sqrt(vhat) + cfg.epsilon);
      }
    }
  }
}

void ParameterStore::save(std::ostream& out, const std::string& meta) const {
  out.write(kMagic, sizeof(kMagic));
  write_u64(out, meta.size());
  out.write(meta.data(), static_cast<std::streamsize>(meta.size()));
  write_u64(out, step_);
  write_u64(out, params_.size());
  for (std::size_t p = 0; p < params_.size(); ++p) {
    write_u64(out, names_[p].size());
    out.write(names_[p].data(), static_cast<std::streamsize>(names_[p].size()));
    write_tensor(out, params_[p]);
    write_tensor(out, moment1_[p]);
    write_tensor(out, moment2_[p]);
  }
  if (!out) throw IoError("failed writing parameter archive");
}

ParameterStore ParameterStore::load(std::istream& in, std::string* meta) {
  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
    throw IoError("not a parameter archive (bad magic)");
  }
  const std::uint64_t meta_len = read_u64(in);
  std::string meta_str(meta_len, '\0');
  in.read(meta_str.data(), static_cast<std::streamsize>(meta_len));
  if (!in) throw IoError("parameter archive truncated");
  if (meta) *meta = std::move(meta_str);

  ParameterStore store;
  store.step_ = read_u64(in);
  const std::uint64_t count = read_u64(in);
  for (std::uint64_t p = 0; p < count; ++p) {
    const std::uint64_t name_len = read_u64(in);
    std::string name(name_len, '\0');
    in.read(name.data(), static_cast<std::streamsize>(name_len));
    if (!in) throw IoError("parameter archive truncated");
    Tensor w = read_tensor(in);
    Tensor m1 = read_tensor(in);
    Tensor m2 = read_tensor(in);
    store.add(std::move(name), std::move(w));
    store.moment1_.back() = std::move(m1);
    store.moment2_.back() = std::move(m2);
  }
  return store;
}

bool ParameterStore::bitwise_equal(const ParameterStore& other) const {
  if (step_ != other.step_ || params_.size() != other.params_.size()) return false;
  for (std::size_t p = 0; p < params_.size(); ++p) {
    if (names_[p] != other.names_[p]) return false;
    auto eq = [](const Tensor& a, const Tensor& b) {
      return a.shape() == b.shape() &&
             std::memcmp(a.data().data(), b.data().data(), a.size() * sizeof(double)) == 0;
    };
    if (!eq(params_[p], other.params_[p]) || !eq(moment1_[p], other.moment1_[p]) ||
        !eq(moment2_[p], other.moment2_[p])) {
      return false;
    }
  }
  return true;
}

}  // namespace kgx
