#include "kbqa/tensor.hpp"

#include <cmath>
#include <limits>

#include <fmt/format.h>

namespace kbqa {

// --- BasicMatrix -----------------------------------------------------------

template <typename T>
BasicMatrix<T> BasicMatrix<T>::from_rows(
    std::initializer_list<std::initializer_list<T>> rows) {
  const std::size_t r = rows.size();
  const std::size_t c = r == 0 ? 0 : rows.begin()->size();
  BasicMatrix out(r, c);
  std::size_t i = 0;
  for (const auto& row : rows) {
    if (row.size() != c) throw std::invalid_argument("ragged matrix rows");
    for (const auto v : row) out.data_[i++] = v;
  }
  return out;
}

template <typename T>
BasicMatrix<T> BasicMatrix<T>::column_vector(std::span<const T> values) {
  BasicMatrix out(values.size(), 1);
  std::copy(values.begin(), values.end(), out.data_.begin());
  return out;
}

template <typename T>
std::vector<T> BasicMatrix<T>::column(std::size_t c) const {
  std::vector<T> out(rows_);
  for (std::size_t r = 0; r < rows_; ++r) out[r] = (*this)(r, c);
  return out;
}

template <typename T>
bool BasicMatrix<T>::all_finite() const {
  return std::all_of(data_.begin(), data_.end(),
                     [](T v) { return std::isfinite(v); });
}

// --- BasicParameter --------------------------------------------------------

template <typename T>
BasicParameter<T>::BasicParameter(std::string param_name, BasicMatrix<T> init,
                                  bool sparse, bool diverse)
    : name(std::move(param_name)),
      value(std::move(init)),
      gradient(value.rows(), value.cols()),
      accum(value.rows(), value.cols()),
      sparse_columns(sparse),
      diversity(diverse) {
  if (sparse_columns) touched_flag.assign(value.cols(), 0);
}

template <typename T>
void BasicParameter<T>::mark_column(std::size_t c) {
  if (!sparse_columns || touched_flag[c] != 0) return;
  touched_flag[c] = 1;
  touched.push_back(c);
}

template <typename T>
void BasicParameter<T>::clear_gradient() {
  if (!sparse_columns) {
    gradient.set_zero();
    return;
  }
  for (const auto c : touched) {
    for (std::size_t r = 0; r < gradient.rows(); ++r) gradient(r, c) = T{0};
    touched_flag[c] = 0;
  }
  touched.clear();
}

// --- BasicTape -------------------------------------------------------------

template <typename T>
VarId BasicTape<T>::constant(BasicMatrix<T> value) {
  return record(std::move(value), nullptr);
}

template <typename T>
VarId BasicTape<T>::record(BasicMatrix<T> value, Backward backward) {
  nodes_.push_back(Node{std::move(value), {}, std::move(backward)});
  return VarId{nodes_.size() - 1};
}

template <typename T>
T BasicTape<T>::scalar(VarId v) const {
  const auto& m = value(v);
  if (m.size() != 1) {
    throw std::invalid_argument(fmt::format(
        "node {} is {}x{}, not a scalar", v.index, m.rows(), m.cols()));
  }
  return m.data()[0];
}

template <typename T>
void BasicTape<T>::backward(VarId root) {
  if (value(root).size() != 1) {
    throw std::invalid_argument("backward() needs a scalar root");
  }
  for (std::size_t i = 0; i <= root.index; ++i) {
    auto& node = nodes_[i];
    node.grad = BasicMatrix<T>(node.value.rows(), node.value.cols());
  }
  nodes_[root.index].grad.data()[0] = T{1};
  for (std::size_t i = root.index + 1; i-- > 0;) {
    if (nodes_[i].backward) nodes_[i].backward(*this, VarId{i});
  }
}

template <typename T>
void BasicTape<T>::clear() {
  nodes_.clear();
  decisions_.clear();
}

// --- Value-level helpers ---------------------------------------------------

template <typename T>
RowMax<T> row_max(const BasicMatrix<T>& f) {
  if (f.cols() == 0) {
    throw std::invalid_argument("row_max over a matrix with no columns");
  }
  RowMax<T> out;
  out.values.resize(f.rows());
  out.columns.resize(f.rows());
  for (std::size_t r = 0; r < f.rows(); ++r) {
    const auto row = f.row(r);
    std::size_t best = 0;
    for (std::size_t c = 1; c < row.size(); ++c) {
      if (row[c] > row[best]) best = c;
    }
    out.values[r] = row[best];
    out.columns[r] = best;
  }
  return out;
}

template <typename T>
T cosine_similarity(std::span<const T> u, std::span<const T> v) {
  if (u.size() != v.size()) {
    throw std::invalid_argument("cosine of vectors with different lengths");
  }
  T dot{0}, nu{0}, nv{0};
  for (std::size_t i = 0; i < u.size(); ++i) {
    dot += u[i] * v[i];
    nu += u[i] * u[i];
    nv += v[i] * v[i];
  }
  return dot / std::max(std::sqrt(nu) * std::sqrt(nv), static_cast<T>(kEpsilon));
}

template <typename T>
T hinge_rank_loss(T margin, T positive, T negative) {
  return std::max(T{0}, margin + negative - positive);
}

template <typename T>
T diversity_penalty(const BasicMatrix<T>& w) {
  const auto d = w.rows();
  if (d < 2) throw std::invalid_argument("diversity penalty needs >= 2 rows");
  const auto m = w.map();
  const typename BasicMatrix<T>::EigenType gram = m * m.transpose();
  T total{0};
  for (std::size_t i = 0; i < d; ++i) {
    for (std::size_t j = i + 1; j < d; ++j) {
      const T denom = std::max(std::sqrt(gram(i, i)) * std::sqrt(gram(j, j)),
                               static_cast<T>(kEpsilon));
      const T c = gram(i, j) / denom;
      total += c * c;
    }
  }
  return total / static_cast<T>(d * (d - 1) / 2);
}

template <typename T>
BasicMatrix<T> diversity_gradient(const BasicMatrix<T>& w) {
  const auto d = w.rows();
  if (d < 2) throw std::invalid_argument("diversity penalty needs >= 2 rows");
  const auto m = w.map();
  using E = typename BasicMatrix<T>::EigenType;
  const E gram = m * m.transpose();
  std::vector<T> norms(d);
  for (std::size_t i = 0; i < d; ++i) norms[i] = std::sqrt(gram(i, i));

  // grad_i = 2/P * sum_j c_ij * (w_j / D_ij - G_ij * n_j * w_i / (n_i D_ij^2))
  E cross = E::Zero(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(d));
  std::vector<T> self(d, T{0});
  for (std::size_t i = 0; i < d; ++i) {
    for (std::size_t j = 0; j < d; ++j) {
      if (i == j) continue;
      const T raw = norms[i] * norms[j];
      const T denom = std::max(raw, static_cast<T>(kEpsilon));
      const T c = gram(i, j) / denom;
      cross(i, j) = c / denom;
      // Below the floor the denominator is a constant.
      if (raw > static_cast<T>(kEpsilon)) {
        self[i] += c * gram(i, j) * norms[j] / (norms[i] * denom * denom);
      }
    }
  }
  const T scale = T{2} / static_cast<T>(d * (d - 1) / 2);
  BasicMatrix<T> out(w.rows(), w.cols());
  auto g = out.map();
  g = cross * m;
  for (std::size_t i = 0; i < d; ++i) {
    g.row(static_cast<Eigen::Index>(i)) -= self[i] * m.row(static_cast<Eigen::Index>(i));
  }
  g *= scale;
  return out;
}

// --- Tape operations -------------------------------------------------------

template <typename T>
VarId embed(BasicTape<T>& tape, BasicParameter<T>& table,
            std::span<const std::uint32_t> ids) {
  const auto d = table.value.rows();
  const auto vocab = table.value.cols();
  BasicMatrix<T> out(d, ids.size());
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] >= vocab) {
      throw std::out_of_range(fmt::format(
          "embedding id {} outside table '{}' of {} entries", ids[i],
          table.name, vocab));
    }
    for (std::size_t r = 0; r < d; ++r) out(r, i) = table.value(r, ids[i]);
  }
  std::vector<std::uint32_t> owned(ids.begin(), ids.end());
  return tape.record(std::move(out), [&table, owned = std::move(owned)](
                                         BasicTape<T>& t, VarId self) {
    const auto& g = t.grad(self);
    for (std::size_t i = 0; i < owned.size(); ++i) {
      table.mark_column(owned[i]);
      for (std::size_t r = 0; r < g.rows(); ++r) {
        table.gradient(r, owned[i]) += g(r, i);
      }
    }
  });
}

template <typename T>
VarId conv_tanh(BasicTape<T>& tape, BasicParameter<T>& weight,
                BasicParameter<T>& bias, VarId input, std::size_t width) {
  const auto& x = tape.value(input);
  const auto d_in = x.rows();
  const auto s = x.cols();
  const auto d_out = weight.value.rows();
  if (width == 0) throw std::invalid_argument("filter width must be >= 1");
  if (weight.value.cols() != width * d_in || bias.value.rows() != d_out ||
      bias.value.cols() != 1) {
    throw std::invalid_argument(fmt::format(
        "conv shape mismatch: W {}x{}, b {}x{}, input {}x{}, width {}",
        weight.value.rows(), weight.value.cols(), bias.value.rows(),
        bias.value.cols(), d_in, s, width));
  }
  const auto m = s + width - 1;
  // Column i of `windows` stacks input columns i-width+1 .. i (zero padded).
  BasicMatrix<T> windows(width * d_in, m);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t k = 0; k < width; ++k) {
      const auto src = static_cast<std::ptrdiff_t>(i + k) -
                       static_cast<std::ptrdiff_t>(width - 1);
      if (src < 0 || src >= static_cast<std::ptrdiff_t>(s)) continue;
      for (std::size_t r = 0; r < d_in; ++r) {
        windows(k * d_in + r, i) = x(r, static_cast<std::size_t>(src));
      }
    }
  }
  BasicMatrix<T> out(d_out, m);
  auto o = out.map();
  o.noalias() = weight.value.map() * windows.map();
  const auto b = bias.value.map();
  for (Eigen::Index c = 0; c < o.cols(); ++c) o.col(c) += b.col(0);
  o = o.array().tanh().matrix();

  return tape.record(
      std::move(out),
      [&weight, &bias, input, width, d_in, s, windows = std::move(windows)](
          BasicTape<T>& t, VarId self) {
        const auto& y = t.value(self);
        using E = typename BasicMatrix<T>::EigenType;
        const E dz = t.grad(self).map().array() *
                     (T{1} - y.map().array().square());
        weight.gradient.map().noalias() += dz * windows.map().transpose();
        bias.gradient.map().col(0) += dz.rowwise().sum();
        const E dwin = weight.value.map().transpose() * dz;
        auto& gx = t.grad(input);
        for (Eigen::Index i = 0; i < dwin.cols(); ++i) {
          for (std::size_t k = 0; k < width; ++k) {
            const auto src = static_cast<std::ptrdiff_t>(i) +
                             static_cast<std::ptrdiff_t>(k) -
                             static_cast<std::ptrdiff_t>(width - 1);
            if (src < 0 || src >= static_cast<std::ptrdiff_t>(s)) continue;
            for (std::size_t r = 0; r < d_in; ++r) {
              gx(r, static_cast<std::size_t>(src)) +=
                  dwin(static_cast<Eigen::Index>(k * d_in + r), i);
            }
          }
        }
      });
}

template <typename T>
VarId select_per_row(BasicTape<T>& tape, VarId f,
                     std::span<const std::size_t> columns) {
  const auto& fv = tape.value(f);
  if (columns.size() != fv.rows()) {
    throw std::invalid_argument("select_per_row needs one column per row");
  }
  BasicMatrix<T> out(fv.rows(), 1);
  for (std::size_t r = 0; r < fv.rows(); ++r) {
    if (columns[r] >= fv.cols()) {
      throw std::out_of_range("select_per_row column out of range");
    }
    out(r, 0) = fv(r, columns[r]);
    tape.note_decision(columns[r]);
  }
  std::vector<std::size_t> cols(columns.begin(), columns.end());
  return tape.record(std::move(out),
                     [f, cols = std::move(cols)](BasicTape<T>& t, VarId self) {
                       const auto& g = t.grad(self);
                       auto& gf = t.grad(f);
                       for (std::size_t r = 0; r < cols.size(); ++r) {
                         gf(r, cols[r]) += g(r, 0);
                       }
                     });
}

template <typename T>
VarId maxpool_rows(BasicTape<T>& tape, VarId f) {
  const auto best = row_max(tape.value(f));
  return select_per_row(tape, f, std::span<const std::size_t>(best.columns));
}

template <typename T>
VarId select_columns(BasicTape<T>& tape, VarId f,
                     std::span<const std::size_t> columns) {
  const auto& fv = tape.value(f);
  BasicMatrix<T> out(fv.rows(), columns.size());
  for (std::size_t k = 0; k < columns.size(); ++k) {
    if (columns[k] >= fv.cols()) {
      throw std::out_of_range("select_columns column out of range");
    }
    tape.note_decision(columns[k]);
    for (std::size_t r = 0; r < fv.rows(); ++r) out(r, k) = fv(r, columns[k]);
  }
  std::vector<std::size_t> cols(columns.begin(), columns.end());
  return tape.record(std::move(out),
                     [f, cols = std::move(cols)](BasicTape<T>& t, VarId self) {
                       const auto& g = t.grad(self);
                       auto& gf = t.grad(f);
                       for (std::size_t k = 0; k < cols.size(); ++k) {
                         for (std::size_t r = 0; r < g.rows(); ++r) {
                           gf(r, cols[k]) += g(r, k);
                         }
                       }
                     });
}

template <typename T>
VarId mean_columns(BasicTape<T>& tape, VarId f) {
  const auto& fv = tape.value(f);
  if (fv.cols() == 0) throw std::invalid_argument("mean over zero columns");
  BasicMatrix<T> out(fv.rows(), 1);
  out.map() = fv.map().rowwise().mean();
  return tape.record(std::move(out), [f](BasicTape<T>& t, VarId self) {
    auto& gf = t.grad(f);
    const auto inv = T{1} / static_cast<T>(gf.cols());
    const auto g = t.grad(self).map();
    auto gm = gf.map();
    for (Eigen::Index c = 0; c < gm.cols(); ++c) gm.col(c) += inv * g.col(0);
  });
}

template <typename T>
VarId weighted_mean_columns(BasicTape<T>& tape, VarId f, VarId weights) {
  const auto& fv = tape.value(f);
  const auto& wv = tape.value(weights);
  if (fv.cols() == 0) throw std::invalid_argument("mean over zero columns");
  if (wv.size() != fv.cols()) {
    throw std::invalid_argument("one weight per column required");
  }
  T total{0};
  for (const auto w : wv.data()) total += w;
  const bool fallback = !(total > T{0});
  tape.note_decision(fallback ? 1 : 0);
  BasicMatrix<T> out(fv.rows(), 1);
  if (fallback) {
    out.map() = fv.map().rowwise().mean();
  } else {
    const auto w = Eigen::Map<const Eigen::Matrix<T, Eigen::Dynamic, 1>>(
        wv.data().data(), static_cast<Eigen::Index>(wv.size()));
    out.map().col(0) = fv.map() * w / total;
  }
  return tape.record(std::move(out), [f, weights, fallback, total](
                                         BasicTape<T>& t, VarId self) {
    const auto& fv = t.value(f);
    const auto& wv = t.value(weights);
    const auto& out = t.value(self);
    const auto& g = t.grad(self);
    auto& gf = t.grad(f);
    const auto m = fv.cols();
    if (fallback) {
      const auto inv = T{1} / static_cast<T>(m);
      for (std::size_t r = 0; r < fv.rows(); ++r) {
        for (std::size_t c = 0; c < m; ++c) gf(r, c) += inv * g(r, 0);
      }
      return;
    }
    auto& gw = t.grad(weights);
    for (std::size_t c = 0; c < m; ++c) {
      const T w = wv.data()[c];
      T dot{0};
      for (std::size_t r = 0; r < fv.rows(); ++r) {
        gf(r, c) += w / total * g(r, 0);
        dot += (fv(r, c) - out(r, 0)) * g(r, 0);
      }
      gw.data()[c] += dot / total;
    }
  });
}

template <typename T>
VarId relu(BasicTape<T>& tape, VarId x) {
  auto out = tape.value(x);
  for (auto& v : out.data()) {
    tape.note_decision(v > T{0} ? 1 : 0);
    v = std::max(v, T{0});
  }
  return tape.record(std::move(out), [x](BasicTape<T>& t, VarId self) {
    const auto in = t.value(x).data();
    const auto g = t.grad(self).data();
    auto gx = t.grad(x).data();
    for (std::size_t i = 0; i < in.size(); ++i) {
      if (in[i] > T{0}) gx[i] += g[i];
    }
  });
}

namespace {

/// Accumulates scale * d cos(u, v) / du into `gu` and d/dv into `gv`.
template <typename T>
void cosine_backward(std::span<const T> u, std::span<const T> v, T scale,
                     std::span<T> gu, std::span<T> gv) {
  T dot{0}, nu2{0}, nv2{0};
  for (std::size_t i = 0; i < u.size(); ++i) {
    dot += u[i] * v[i];
    nu2 += u[i] * u[i];
    nv2 += v[i] * v[i];
  }
  const T nu = std::sqrt(nu2);
  const T nv = std::sqrt(nv2);
  const bool floored = nu * nv <= static_cast<T>(kEpsilon);
  const T denom = floored ? static_cast<T>(kEpsilon) : nu * nv;
  const T inv = T{1} / denom;
  const T tail = dot / (denom * denom);
  const T cu = floored ? T{0} : tail * nv / nu;
  const T cv = floored ? T{0} : tail * nu / nv;
  for (std::size_t i = 0; i < u.size(); ++i) {
    gu[i] += scale * (v[i] * inv - cu * u[i]);
    gv[i] += scale * (u[i] * inv - cv * v[i]);
  }
}

}  // namespace

template <typename T>
VarId cosine(BasicTape<T>& tape, VarId u, VarId v) {
  const auto& uv = tape.value(u);
  const auto& vv = tape.value(v);
  BasicMatrix<T> out(1, 1);
  out(0, 0) = cosine_similarity<T>(uv.data(), vv.data());
  return tape.record(std::move(out), [u, v](BasicTape<T>& t, VarId self) {
    const T g = t.grad(self)(0, 0);
    if (u.index == v.index) {
      // u and v alias the same node; accumulate both halves into one buffer.
      auto gu = t.grad(u).data();
      std::vector<T> a(gu.size(), T{0}), b(gu.size(), T{0});
      cosine_backward<T>(t.value(u).data(), t.value(v).data(), g, a, b);
      for (std::size_t i = 0; i < gu.size(); ++i) gu[i] += a[i] + b[i];
      return;
    }
    cosine_backward<T>(t.value(u).data(), t.value(v).data(), g,
                       t.grad(u).data(), t.grad(v).data());
  });
}

template <typename T>
VarId cosine_columns(BasicTape<T>& tape, VarId v, VarId f) {
  const auto& vv = tape.value(v);
  const auto& fv = tape.value(f);
  if (vv.size() != fv.rows()) {
    throw std::invalid_argument("cosine_columns: vector/feature-map mismatch");
  }
  BasicMatrix<T> out(fv.cols(), 1);
  for (std::size_t c = 0; c < fv.cols(); ++c) {
    const auto col = fv.column(c);
    out(c, 0) = cosine_similarity<T>(vv.data(), col);
  }
  return tape.record(std::move(out), [v, f](BasicTape<T>& t, VarId self) {
    const auto& fv = t.value(f);
    const auto& g = t.grad(self);
    auto& gf = t.grad(f);
    std::vector<T> gcol(fv.rows());
    for (std::size_t c = 0; c < fv.cols(); ++c) {
      const auto col = fv.column(c);
      std::fill(gcol.begin(), gcol.end(), T{0});
      cosine_backward<T>(t.value(v).data(), col, g(c, 0), t.grad(v).data(),
                         gcol);
      for (std::size_t r = 0; r < fv.rows(); ++r) gf(r, c) += gcol[r];
    }
  });
}

template <typename T>
VarId bilinear_tanh_scores(BasicTape<T>& tape, VarId v,
                           BasicParameter<T>& bilinear, VarId f) {
  const auto& vv = tape.value(v);
  const auto& fv = tape.value(f);
  const auto d = fv.rows();
  if (vv.size() != d || bilinear.value.rows() != d ||
      bilinear.value.cols() != d) {
    throw std::invalid_argument("bilinear_tanh_scores: shape mismatch");
  }
  using E = typename BasicMatrix<T>::EigenType;
  const auto vcol = Eigen::Map<const Eigen::Matrix<T, Eigen::Dynamic, 1>>(
      vv.data().data(), static_cast<Eigen::Index>(d));
  // r = v^T U, a 1 x d row.
  const E r = vcol.transpose() * bilinear.value.map();
  BasicMatrix<T> out(fv.cols(), 1);
  out.map() = (r * fv.map()).transpose().array().tanh().matrix();
  return tape.record(std::move(out), [v, f, &bilinear, r](BasicTape<T>& t,
                                                          VarId self) {
    const auto& s = t.value(self);
    const auto& fv = t.value(f);
    const auto& vv = t.value(v);
    const Eigen::Matrix<T, Eigen::Dynamic, 1> dz =
        t.grad(self).map().col(0).array() * (T{1} - s.map().col(0).array().square());
    const Eigen::Matrix<T, Eigen::Dynamic, 1> h = fv.map() * dz;
    const auto vcol = Eigen::Map<const Eigen::Matrix<T, Eigen::Dynamic, 1>>(
        vv.data().data(), static_cast<Eigen::Index>(vv.size()));
    auto gv = Eigen::Map<Eigen::Matrix<T, Eigen::Dynamic, 1>>(
        t.grad(v).data().data(), static_cast<Eigen::Index>(vv.size()));
    gv += bilinear.value.map() * h;
    bilinear.gradient.map() += vcol * h.transpose();
    t.grad(f).map() += r.transpose() * dz.transpose();
  });
}

template <typename T>
VarId add(BasicTape<T>& tape, VarId a, VarId b) {
  auto out = tape.value(a);
  const auto& bv = tape.value(b);
  if (bv.rows() != out.rows() || bv.cols() != out.cols()) {
    throw std::invalid_argument("add: shape mismatch");
  }
  out.map() += bv.map();
  return tape.record(std::move(out), [a, b](BasicTape<T>& t, VarId self) {
    t.grad(a).map() += t.grad(self).map();
    t.grad(b).map() += t.grad(self).map();
  });
}

template <typename T>
VarId add_constant(BasicTape<T>& tape, VarId a, T c) {
  auto out = tape.value(a);
  out.map().array() += c;
  return tape.record(std::move(out), [a](BasicTape<T>& t, VarId self) {
    t.grad(a).map() += t.grad(self).map();
  });
}

template <typename T>
VarId hinge_rank_loss(BasicTape<T>& tape, T margin, VarId positive,
                      VarId negative) {
  const T raw = margin + tape.scalar(negative) - tape.scalar(positive);
  const bool active = raw > T{0};
  tape.note_decision(active ? 1 : 0);
  BasicMatrix<T> out(1, 1);
  out(0, 0) = active ? raw : T{0};
  return tape.record(std::move(out), [positive, negative, active](
                                         BasicTape<T>& t, VarId self) {
    if (!active) return;
    const T g = t.grad(self)(0, 0);
    t.grad(negative)(0, 0) += g;
    t.grad(positive)(0, 0) -= g;
  });
}

// --- Optimization ----------------------------------------------------------

namespace {

template <typename T, typename Fn>
void for_each_active(BasicParameter<T>& p, Fn&& fn) {
  if (!p.sparse_columns) {
    for (std::size_t i = 0; i < p.value.size(); ++i) fn(i);
    return;
  }
  const auto cols = p.value.cols();
  for (const auto c : p.touched) {
    for (std::size_t r = 0; r < p.value.rows(); ++r) fn(r * cols + c);
  }
}

}  // namespace

template <typename T>
void add_regularizer_gradients(std::span<BasicParameter<T>* const> params,
                               double l2_weight, double diversity_weight) {
  const auto l2 = static_cast<T>(l2_weight);
  for (auto* p : params) {
    if (l2_weight != 0.0) {
      auto g = p->gradient.data();
      auto v = p->value.data();
      for_each_active(*p, [&](std::size_t i) { g[i] += l2 * v[i]; });
    }
    if (p->diversity && diversity_weight != 0.0 && p->value.rows() >= 2) {
      p->gradient.map() += static_cast<T>(diversity_weight) *
                           diversity_gradient(p->value).map();
    }
  }
}

template <typename T>
T regularizer_value(std::span<BasicParameter<T>* const> params,
                    double l2_weight, double diversity_weight) {
  T total{0};
  for (auto* p : params) {
    total += static_cast<T>(l2_weight / 2.0) * p->value.map().squaredNorm();
    if (p->diversity && p->value.rows() >= 2) {
      total += static_cast<T>(diversity_weight) * diversity_penalty(p->value);
    }
  }
  return total;
}

template <typename T>
void adagrad_step(std::span<BasicParameter<T>* const> params,
                  const AdagradConfig& cfg) {
  add_regularizer_gradients(params, cfg.l2_weight, cfg.diversity_weight);
  for (auto* p : params) {
    bool finite = true;
    const auto g = p->gradient.data();
    for_each_active(*p, [&](std::size_t i) {
      if (!std::isfinite(g[i])) finite = false;
    });
    if (!finite) {
      throw NumericError(
          fmt::format("non-finite gradient in parameter '{}'", p->name));
    }
  }
  const auto lr = static_cast<T>(cfg.learning_rate);
  const auto eps = static_cast<T>(kEpsilon);
  for (auto* p : params) {
    auto g = p->gradient.data();
    auto v = p->value.data();
    auto acc = p->accum.data();
    for_each_active(*p, [&](std::size_t i) {
      acc[i] += g[i] * g[i];
      v[i] -= lr * g[i] / (std::sqrt(acc[i]) + eps);
    });
    p->clear_gradient();
  }
}

template <typename T>
void init_uniform(BasicMatrix<T>& m, double bound, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> dist(-bound, bound);
  for (auto& v : m.data()) v = static_cast<T>(dist(rng));
}

// --- Instantiations --------------------------------------------------------

#define KBQA_INSTANTIATE_TENSOR(T)                                            \
  template class BasicMatrix<T>;                                              \
  template struct BasicParameter<T>;                                          \
  template class BasicTape<T>;                                                \
  template RowMax<T> row_max<T>(const BasicMatrix<T>&);                       \
  template T cosine_similarity<T>(std::span<const T>, std::span<const T>);    \
  template T hinge_rank_loss<T>(T, T, T);                                     \
  template T diversity_penalty<T>(const BasicMatrix<T>&);                     \
  template BasicMatrix<T> diversity_gradient<T>(const BasicMatrix<T>&);       \
  template VarId embed<T>(BasicTape<T>&, BasicParameter<T>&,                  \
                          std::span<const std::uint32_t>);                    \
  template VarId conv_tanh<T>(BasicTape<T>&, BasicParameter<T>&,              \
                              BasicParameter<T>&, VarId, std::size_t);        \
  template VarId maxpool_rows<T>(BasicTape<T>&, VarId);                       \
  template VarId select_per_row<T>(BasicTape<T>&, VarId,                      \
                                   std::span<const std::size_t>);             \
  template VarId select_columns<T>(BasicTape<T>&, VarId,                      \
                                   std::span<const std::size_t>);             \
  template VarId mean_columns<T>(BasicTape<T>&, VarId);                       \
  template VarId weighted_mean_columns<T>(BasicTape<T>&, VarId, VarId);       \
  template VarId relu<T>(BasicTape<T>&, VarId);                               \
  template VarId cosine<T>(BasicTape<T>&, VarId, VarId);                      \
  template VarId cosine_columns<T>(BasicTape<T>&, VarId, VarId);              \
  template VarId bilinear_tanh_scores<T>(BasicTape<T>&, VarId,                \
                                         BasicParameter<T>&, VarId);          \
  template VarId add<T>(BasicTape<T>&, VarId, VarId);                         \
  template VarId add_constant<T>(BasicTape<T>&, VarId, T);                    \
  template VarId hinge_rank_loss<T>(BasicTape<T>&, T, VarId, VarId);          \
  template void add_regularizer_gradients<T>(                                 \
      std::span<BasicParameter<T>* const>, double, double);                   \
  template T regularizer_value<T>(std::span<BasicParameter<T>* const>,        \
                                  double, double);                            \
  template void adagrad_step<T>(std::span<BasicParameter<T>* const>,          \
                                const AdagradConfig&);                        \
  template void init_uniform<T>(BasicMatrix<T>&, double, std::mt19937_64&);

KBQA_INSTANTIATE_TENSOR(float)
KBQA_INSTANTIATE_TENSOR(double)

#undef KBQA_INSTANTIATE_TENSOR

}  // namespace kbqa
