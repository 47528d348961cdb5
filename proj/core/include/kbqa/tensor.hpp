#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <initializer_list>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace kbqa {

/// Guard used in cosine denominators and the Adagrad root.
inline constexpr double kEpsilon = 1e-8;

/// Raised when NaN or Inf shows up where finite values are required.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Dense row-major matrix. Column i of a feature map is the representation of
/// the i-th entry (or n-gram).
template <typename T>
class BasicMatrix {
 public:
  using EigenType =
      Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  using Map = Eigen::Map<EigenType>;
  using ConstMap = Eigen::Map<const EigenType>;

  BasicMatrix() = default;
  BasicMatrix(std::size_t rows, std::size_t cols, T fill = T{0})
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  static BasicMatrix from_rows(
      std::initializer_list<std::initializer_list<T>> rows);
  /// rows x 1 matrix holding `values`.
  static BasicMatrix column_vector(std::span<const T> values);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  T& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  T operator()(std::size_t r, std::size_t c) const {
    return data_[r * cols_ + c];
  }

  std::span<T> data() { return data_; }
  std::span<const T> data() const { return data_; }
  std::span<T> row(std::size_t r) {
    return std::span<T>(data_).subspan(r * cols_, cols_);
  }
  std::span<const T> row(std::size_t r) const {
    return std::span<const T>(data_).subspan(r * cols_, cols_);
  }
  std::vector<T> column(std::size_t c) const;

  Map map() {
    return Map(data_.data(), static_cast<Eigen::Index>(rows_),
               static_cast<Eigen::Index>(cols_));
  }
  ConstMap map() const {
    return ConstMap(data_.data(), static_cast<Eigen::Index>(rows_),
                    static_cast<Eigen::Index>(cols_));
  }

  void set_zero() { std::fill(data_.begin(), data_.end(), T{0}); }
  bool all_finite() const;

  template <typename U>
  BasicMatrix<U> cast() const {
    BasicMatrix<U> out(rows_, cols_);
    for (std::size_t i = 0; i < data_.size(); ++i) {
      out.data()[i] = static_cast<U>(data_[i]);
    }
    return out;
  }

  friend bool operator==(const BasicMatrix&, const BasicMatrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<T> data_;
};

using Matrix = BasicMatrix<float>;

/// Learnable matrix with its gradient and Adagrad accumulator.
template <typename T>
struct BasicParameter {
  std::string name;
  BasicMatrix<T> value;
  BasicMatrix<T> gradient;
  BasicMatrix<T> accum;
  /// Embedding tables: the optimizer and L2 only visit columns that received
  /// gradient since the last step.
  bool sparse_columns = false;
  /// Rows of this matrix are filters subject to the diversity penalty.
  bool diversity = false;
  std::vector<std::size_t> touched;
  std::vector<std::uint8_t> touched_flag;

  BasicParameter() = default;
  BasicParameter(std::string param_name, BasicMatrix<T> init,
                 bool sparse = false, bool diverse = false);

  void mark_column(std::size_t c);
  void clear_gradient();

  template <typename U>
  BasicParameter<U> cast() const {
    BasicParameter<U> out(name, value.template cast<U>(), sparse_columns,
                          diversity);
    out.accum = accum.template cast<U>();
    return out;
  }
};

using Parameter = BasicParameter<float>;

struct VarId {
  std::size_t index = 0;
};

/// Records primitive operations in execution order. Nodes only reference
/// earlier nodes, so walking the record backwards visits every node after all
/// of its consumers.
template <typename T>
class BasicTape {
 public:
  using Backward = std::function<void(BasicTape&, VarId)>;

  VarId constant(BasicMatrix<T> value);
  VarId record(BasicMatrix<T> value, Backward backward);

  const BasicMatrix<T>& value(VarId v) const { return nodes_.at(v.index).value; }
  T scalar(VarId v) const;
  /// Only valid inside backward().
  BasicMatrix<T>& grad(VarId v) { return nodes_.at(v.index).grad; }

  /// Seeds d(root)/d(root) = 1 and propagates into every reachable parameter.
  void backward(VarId root);

  /// Discrete choices taken during the forward pass (argmax columns, hinge
  /// activity, clamping). Two passes with equal decision records are on the
  /// same smooth piece of the loss.
  void note_decision(std::size_t d) { decisions_.push_back(d); }
  const std::vector<std::size_t>& decisions() const { return decisions_; }

  std::size_t size() const { return nodes_.size(); }
  void clear();

 private:
  struct Node {
    BasicMatrix<T> value;
    BasicMatrix<T> grad;
    Backward backward;
  };
  std::vector<Node> nodes_;
  std::vector<std::size_t> decisions_;
};

using Tape = BasicTape<float>;

template <typename T>
struct RowMax {
  std::vector<T> values;
  std::vector<std::size_t> columns;
};

/// Per-row maximum; ties resolve to the smallest column. Throws on zero
/// columns.
template <typename T>
RowMax<T> row_max(const BasicMatrix<T>& f);

template <typename T>
T cosine_similarity(std::span<const T> u, std::span<const T> v);

template <typename T>
T hinge_rank_loss(T margin, T positive, T negative);

/// Mean over unordered row pairs of squared cosine; zero iff the rows are
/// pairwise orthogonal. Needs at least two rows.
template <typename T>
T diversity_penalty(const BasicMatrix<T>& w);

template <typename T>
BasicMatrix<T> diversity_gradient(const BasicMatrix<T>& w);

// --- Tape operations -------------------------------------------------------

/// Column i of the result is column ids[i] of the table. Throws
/// std::out_of_range for ids outside the table.
template <typename T>
VarId embed(BasicTape<T>& tape, BasicParameter<T>& table,
            std::span<const std::uint32_t> ids);

/// Wide convolution with zero padding: input d x s gives d x (s + width - 1),
/// column i = tanh(W * [x_{i-width+1}; ...; x_i] + b).
template <typename T>
VarId conv_tanh(BasicTape<T>& tape, BasicParameter<T>& weight,
                BasicParameter<T>& bias, VarId input, std::size_t width);

/// Row-wise maximum as a d x 1 column.
template <typename T>
VarId maxpool_rows(BasicTape<T>& tape, VarId f);

/// out[j] = f[j, columns[j]]; gradient flows only to the picked cells.
template <typename T>
VarId select_per_row(BasicTape<T>& tape, VarId f,
                     std::span<const std::size_t> columns);

/// Sub-matrix made of the listed columns.
template <typename T>
VarId select_columns(BasicTape<T>& tape, VarId f,
                     std::span<const std::size_t> columns);

template <typename T>
VarId mean_columns(BasicTape<T>& tape, VarId f);

/// sum_i w_i f[:, i] / sum_i w_i for nonnegative weights (m x 1). A zero
/// weight sum falls back to the unweighted mean.
template <typename T>
VarId weighted_mean_columns(BasicTape<T>& tape, VarId f, VarId weights);

template <typename T>
VarId relu(BasicTape<T>& tape, VarId x);

/// u.v / (|u||v| + eps) as a 1 x 1 node.
template <typename T>
VarId cosine(BasicTape<T>& tape, VarId u, VarId v);

/// m x 1 column of cosines between v (d x 1) and each column of f.
template <typename T>
VarId cosine_columns(BasicTape<T>& tape, VarId v, VarId f);

/// m x 1 column of tanh(v^T U f[:, i]).
template <typename T>
VarId bilinear_tanh_scores(BasicTape<T>& tape, VarId v,
                           BasicParameter<T>& bilinear, VarId f);

template <typename T>
VarId add(BasicTape<T>& tape, VarId a, VarId b);

template <typename T>
VarId add_constant(BasicTape<T>& tape, VarId a, T c);

/// max(0, margin + negative - positive) over 1 x 1 nodes.
template <typename T>
VarId hinge_rank_loss(BasicTape<T>& tape, T margin, VarId positive,
                      VarId negative);

// --- Optimization ----------------------------------------------------------

struct AdagradConfig {
  double learning_rate = 0.1;
  double l2_weight = 0.0003;
  double diversity_weight = 0.03;
};

/// Adds l2 * value to every gradient (touched columns only for sparse
/// parameters) and diversity * grad(penalty) to parameters flagged for it.
template <typename T>
void add_regularizer_gradients(std::span<BasicParameter<T>* const> params,
                               double l2_weight, double diversity_weight);

/// (l2 / 2) * sum of squared values over all entries plus diversity * penalty
/// for flagged parameters.
template <typename T>
T regularizer_value(std::span<BasicParameter<T>* const> params,
                    double l2_weight, double diversity_weight);

/// Adds the regularizer gradients, then per coordinate
/// accum += g^2 and value -= lr * g / (sqrt(accum) + eps), and clears the
/// gradients. Throws NumericError before touching any value if a gradient
/// is not finite.
template <typename T>
void adagrad_step(std::span<BasicParameter<T>* const> params,
                  const AdagradConfig& cfg);

template <typename T>
void init_uniform(BasicMatrix<T>& m, double bound, std::mt19937_64& rng);

}  // namespace kbqa
