#pragma once

#include <Eigen/Dense>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "nlohmann/json_fwd.hpp"
#include "pgt/rng.hpp"

namespace pgt {

using Mat = Eigen::MatrixXd;

struct TensorParam {
  std::string name;
  Mat value;
  Mat grad;
  bool trainable = true;
};

// A named, versioned parameter set. Used for the retriever (eta), the
// generator (phi), the reward model (theta) and frozen snapshots of each.
class ParamSet {
 public:
  TensorParam& add(const std::string& name, Eigen::Index rows, Eigen::Index cols,
                   bool trainable = true);
  TensorParam& at(const std::string& name);
  const TensorParam& at(const std::string& name) const;
  bool has(const std::string& name) const { return by_name_.count(name) > 0; }

  std::vector<TensorParam>& tensors() { return tensors_; }
  const std::vector<TensorParam>& tensors() const { return tensors_; }

  size_t scalar_count() const;
  void zero_grads();
  double grad_norm() const;
  void scale_grads(double s);

  // Content hash over names + values (used to verify frozen parameters).
  std::string content_hash() const;

  nlohmann::json to_json() const;
  static ParamSet from_json(const nlohmann::json& j);

 private:
  std::vector<TensorParam> tensors_;
  std::unordered_map<std::string, size_t> by_name_;
};

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double clip_norm = 1.0;  // global gradient-norm clip; 0 disables
};

// Adaptive moment estimation over the trainable tensors of one ParamSet.
class Adam {
 public:
  Adam(ParamSet& params, AdamConfig cfg);

  // Applies one update from the accumulated grads and zeroes them.
  // Returns the (pre-clip) global gradient norm.
  double step();

  int64_t steps_taken() const { return t_; }
  const AdamConfig& config() const { return cfg_; }

  nlohmann::json state_to_json() const;
  void state_from_json(const nlohmann::json& j);

 private:
  ParamSet& params_;
  AdamConfig cfg_;
  std::vector<Mat> m_;
  std::vector<Mat> v_;
  int64_t t_ = 0;
};

// Versioned checkpoint wrapper binding a ParamSet to the tokenizer it was
// trained against plus free-form metadata.
struct ParamBundle {
  static constexpr const char* kFormatVersion = "pgt-params-1";
  std::string name;  // e.g. "retriever", "generator"
  std::string tokenizer_hash;
  ParamSet params;

  void save(const std::string& path, const nlohmann::json& metadata) const;
  static ParamBundle load(const std::string& path, nlohmann::json* metadata_out = nullptr);
};

void gaussian_init(Mat& m, Rng& rng, double stddev);

}  // namespace pgt
