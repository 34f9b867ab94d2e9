#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "fieldgraph/graph.hpp"
#include "fieldgraph/matrix.hpp"

namespace fieldgraph {

enum class Activation { elu, sigmoid };

std::string_view to_string(Activation a);

/// One graph convolution: activation(P * X * weight + bias).
struct GcnLayer {
  Matrix weight;  // in x out
  Vector bias;    // out
  Activation activation = Activation::elu;
  bool l2_regularized = true;

  int in_width() const noexcept { return static_cast<int>(weight.rows()); }
  int out_width() const noexcept { return static_cast<int>(weight.cols()); }
};

/// Layer widths of the reference architecture: 9 -> 32 x5 -> 1.
inline constexpr std::array<int, 7> kCanonicalWidths{9, 32, 32, 32, 32, 32, 1};
inline constexpr std::size_t kCanonicalParamCount = 4577;

struct GcnModel {
  std::vector<GcnLayer> layers;

  std::vector<int> widths() const;
  bool is_canonical() const;
};

/// D^-1/2 (A + I) D^-1/2 with D_ii = sum_j (A + I)_ij.
struct PropagationMatrix {
  Matrix p;
};

/// Throws AsymmetricInput / NegativeWeight on invalid adjacency.
PropagationMatrix renormalize(const Matrix& adjacency);

double elu(double v);
double sigmoid(double v);

Matrix layer_forward(const PropagationMatrix& prop, const Matrix& x, const GcnLayer& layer);

/// Per-node outputs in (0, 1).
Vector model_forward(const PropagationMatrix& prop, const Matrix& features, const GcnModel& model);
Vector model_forward(const FieldGraph& graph, const GcnModel& model);

/// Glorot-uniform weights, zero biases; ELU on hidden layers, sigmoid on the
/// last; L2 on every layer but the last. Reproducible from `seed`.
GcnModel init_params(std::uint64_t seed, std::span<const int> widths = kCanonicalWidths);

std::size_t param_count(const GcnModel& model);
std::vector<std::size_t> layer_param_counts(const GcnModel& model);

/// Throws ShapeMismatch when consecutive layer widths disagree.
void validate(const GcnModel& model);

std::string model_to_json(const GcnModel& model);
GcnModel model_from_json(std::string_view text);
void save_checkpoint(const GcnModel& model, const std::filesystem::path& path);
GcnModel load_checkpoint(const std::filesystem::path& path);

/// Single-precision copy of a model for inference.
class InferenceModel {
 public:
  explicit InferenceModel(const GcnModel& model);

  Eigen::VectorXf predict(const FieldGraph& graph) const;
  Eigen::VectorXf predict(const MatrixF& propagation, const MatrixF& features) const;

  static MatrixF renormalize(const FieldGraph& graph);

 private:
  struct Layer {
    MatrixF weight;
    Eigen::RowVectorXf bias;
    Activation activation;
  };
  std::vector<Layer> layers_;
};

}  // namespace fieldgraph
