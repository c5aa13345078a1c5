#include "pgt/params.hpp"

#include <cmath>
#include <fstream>

#include "nlohmann/json.hpp"
#include "pgt/common.hpp"
#include "pgt/sha256.hpp"

namespace pgt {

TensorParam& ParamSet::add(const std::string& name, Eigen::Index rows,
                           Eigen::Index cols, bool trainable) {
  if (by_name_.count(name)) throw PipelineError("duplicate parameter tensor: " + name);
  TensorParam t;
  t.name = name;
  t.value = Mat::Zero(rows, cols);
  t.grad = Mat::Zero(rows, cols);
  t.trainable = trainable;
  by_name_[name] = tensors_.size();
  tensors_.push_back(std::move(t));
  return tensors_.back();
}

TensorParam& ParamSet::at(const std::string& name) {
  auto it = by_name_.find(name);
  if (it == by_name_.end()) throw PipelineError("no parameter tensor named " + name);
  return tensors_[it->second];
}

const TensorParam& ParamSet::at(const std::string& name) const {
  auto it = by_name_.find(name);
  if (it == by_name_.end()) throw PipelineError("no parameter tensor named " + name);
  return tensors_[it->second];
}

size_t ParamSet::scalar_count() const {
  size_t n = 0;
  for (const auto& t : tensors_) n += static_cast<size_t>(t.value.size());
  return n;
}

void ParamSet::zero_grads() {
  for (auto& t : tensors_) t.grad.setZero();
}

double ParamSet::grad_norm() const {
  double sq = 0.0;
  for (const auto& t : tensors_)
    if (t.trainable) sq += t.grad.squaredNorm();
  return std::sqrt(sq);
}

void ParamSet::scale_grads(double s) {
  for (auto& t : tensors_)
    if (t.trainable) t.grad *= s;
}

std::string ParamSet::content_hash() const {
  Sha256 h;
  for (const auto& t : tensors_) {
    h.update(t.name);
    h.update(t.value.data(), sizeof(double) * static_cast<size_t>(t.value.size()));
  }
  const auto d = h.digest();
  static const char* kHex = "0123456789abcdef";
  std::string s;
  for (const uint8_t b : d) {
    s.push_back(kHex[b >> 4]);
    s.push_back(kHex[b & 0xf]);
  }
  return s;
}

nlohmann::json ParamSet::to_json() const {
  nlohmann::json j = nlohmann::json::array();
  for (const auto& t : tensors_) {
    std::vector<double> data(t.value.data(), t.value.data() + t.value.size());
    j.push_back({{"name", t.name},
                 {"rows", t.value.rows()},
                 {"cols", t.value.cols()},
                 {"trainable", t.trainable},
                 {"data", data}});
  }
  return j;
}

ParamSet ParamSet::from_json(const nlohmann::json& j) {
  ParamSet p;
  for (const auto& tj : j) {
    auto& t = p.add(tj.at("name").get<std::string>(), tj.at("rows").get<Eigen::Index>(),
                    tj.at("cols").get<Eigen::Index>(), tj.at("trainable").get<bool>());
    const auto data = tj.at("data").get<std::vector<double>>();
    if (static_cast<Eigen::Index>(data.size()) != t.value.size())
      throw PipelineError("tensor size mismatch for " + t.name);
    std::copy(data.begin(), data.end(), t.value.data());
  }
  return p;
}

Adam::Adam(ParamSet& params, AdamConfig cfg) : params_(params), cfg_(cfg) {
  for (const auto& t : params_.tensors()) {
    m_.push_back(Mat::Zero(t.value.rows(), t.value.cols()));
    v_.push_back(Mat::Zero(t.value.rows(), t.value.cols()));
  }
}

double Adam::step() {
  const double norm = params_.grad_norm();
  if (cfg_.clip_norm > 0.0 && norm > cfg_.clip_norm)
    params_.scale_grads(cfg_.clip_norm / norm);
  ++t_;
  const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
  auto& ts = params_.tensors();
  for (size_t i = 0; i < ts.size(); ++i) {
    if (!ts[i].trainable) continue;
    m_[i] = cfg_.beta1 * m_[i] + (1.0 - cfg_.beta1) * ts[i].grad;
    v_[i] = cfg_.beta2 * v_[i].array().matrix() +
            (1.0 - cfg_.beta2) * ts[i].grad.array().square().matrix();
    const auto mhat = m_[i].array() / bc1;
    const auto vhat = v_[i].array() / bc2;
    ts[i].value.array() -= cfg_.lr * mhat / (vhat.sqrt() + cfg_.eps);
  }
  params_.zero_grads();
  return norm;
}

nlohmann::json Adam::state_to_json() const {
  nlohmann::json j;
  j["t"] = t_;
  j["m"] = nlohmann::json::array();
  j["v"] = nlohmann::json::array();
  for (const auto& m : m_)
    j["m"].push_back(std::vector<double>(m.data(), m.data() + m.size()));
  for (const auto& v : v_)
    j["v"].push_back(std::vector<double>(v.data(), v.data() + v.size()));
  return j;
}

void Adam::state_from_json(const nlohmann::json& j) {
  t_ = j.at("t").get<int64_t>();
  const auto& jm = j.at("m");
  const auto& jv = j.at("v");
  if (jm.size() != m_.size() || jv.size() != v_.size())
    throw PipelineError("optimizer state does not match parameter set");
  for (size_t i = 0; i < m_.size(); ++i) {
    const auto md = jm[i].get<std::vector<double>>();
    const auto vd = jv[i].get<std::vector<double>>();
    std::copy(md.begin(), md.end(), m_[i].data());
    std::copy(vd.begin(), vd.end(), v_[i].data());
  }
}

void ParamBundle::save(const std::string& path, const nlohmann::json& metadata) const {
  nlohmann::json j;
  j["format_version"] = kFormatVersion;
  j["name"] = name;
  j["tokenizer_hash"] = tokenizer_hash;
  j["metadata"] = metadata;
  j["tensors"] = params.to_json();
  std::ofstream out(path, std::ios::binary);
  if (!out) throw PipelineError("cannot write checkpoint: " + path);
  out << j.dump() << "\n";
}

ParamBundle ParamBundle::load(const std::string& path, nlohmann::json* metadata_out) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw PipelineError("cannot open checkpoint: " + path);
  nlohmann::json j;
  in >> j;
  if (j.at("format_version").get<std::string>() != kFormatVersion)
    throw PipelineError("unsupported checkpoint format in " + path);
  ParamBundle b;
  b.name = j.at("name").get<std::string>();
  b.tokenizer_hash = j.at("tokenizer_hash").get<std::string>();
  b.params = ParamSet::from_json(j.at("tensors"));
  if (metadata_out) *metadata_out = j.value("metadata", nlohmann::json::object());
  return b;
}

void gaussian_init(Mat& m, Rng& rng, double stddev) {
  for (Eigen::Index i = 0; i < m.size(); ++i) m(i) = rng.normal(0.0, stddev);
}

}  // namespace pgt
