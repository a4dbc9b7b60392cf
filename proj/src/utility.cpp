#include "mnl_lab/utility.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>

#include <json.hpp>

#include "mnl_lab/kernels.hpp"

namespace mnl_lab {

namespace {

inline double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

constexpr double kPi = 3.14159265358979323846;

// sup |sigma'| and sup |sigma''| for the logistic sigmoid
constexpr double kSigP = 0.25;
constexpr double kSigPP = 0.09622504486493764;  // 1/(6*sqrt(3))

}  // namespace

void UtilityModel::check_dims(std::span<const double> w,
                              std::span<const double> x) const {
  if (static_cast<int>(w.size()) != param_dim())
    throw DimensionMismatch(name() + ": parameter length " +
                            std::to_string(w.size()) + " != d_w " +
                            std::to_string(param_dim()));
  if (static_cast<int>(x.size()) != input_dim())
    throw DimensionMismatch(name() + ": feature length " +
                            std::to_string(x.size()) + " != d " +
                            std::to_string(input_dim()));
}

// ---- TwoLayerSigmoidNet ----

TwoLayerSigmoidNet::TwoLayerSigmoidNet(int input_dim, int hidden_dim)
    : dim_(input_dim), hidden_(hidden_dim) {
  if (input_dim < 1 || hidden_dim < 1)
    throw DimensionMismatch("network dims must be >= 1");
}

double TwoLayerSigmoidNet::value(std::span<const double> w,
                                 std::span<const double> x) const {
  check_dims(w, x);
  const double* w1 = w.data();
  const double* b1 = w1 + hidden_ * dim_;
  const double* w2 = b1 + hidden_;
  const double b2 = w2[hidden_];
  double out = b2;
  for (int j = 0; j < hidden_; ++j) {
    const double a = kern::dot(w1 + j * dim_, x.data(), dim_) + b1[j];
    out += w2[j] * sigmoid(a);
  }
  return out;
}

double TwoLayerSigmoidNet::value_and_grad(std::span<const double> w,
                                          std::span<const double> x,
                                          std::span<double> g) const {
  check_dims(w, x);
  if (g.size() != w.size())
    throw DimensionMismatch("gradient buffer length mismatch");
  const double* w1 = w.data();
  const double* b1 = w1 + hidden_ * dim_;
  const double* w2 = b1 + hidden_;
  const double b2 = w2[hidden_];

  double* g_w1 = g.data();
  double* g_b1 = g_w1 + hidden_ * dim_;
  double* g_w2 = g_b1 + hidden_;
  double* g_b2 = g_w2 + hidden_;

  double out = b2;
  for (int j = 0; j < hidden_; ++j) {
    const double a = kern::dot(w1 + j * dim_, x.data(), dim_) + b1[j];
    const double h = sigmoid(a);
    out += w2[j] * h;
    const double dh = h * (1.0 - h);      // sigma'(a)
    const double back = w2[j] * dh;       // df/da_j
    g_w2[j] = h;
    g_b1[j] = back;
    double* row = g_w1 + j * dim_;
    for (int k = 0; k < dim_; ++k) row[k] = back * x[k];
  }
  *g_b2 = 1.0;
  return out;
}

void TwoLayerSigmoidNet::grad(std::span<const double> w,
                              std::span<const double> x,
                              std::span<double> g) const {
  value_and_grad(w, x, g);
}

BoundConstants TwoLayerSigmoidNet::bound_constants(double param_cap,
                                                   double feature_cap) const {
  const double m = hidden_;
  const double rw = param_cap;
  const double vx2 = 1.0 + feature_cap * feature_cap;  // ||(x,1)||^2
  // |f| = |w2.h + b2| <= ||(w2,b2)|| * ||(h,1)|| <= rw * sqrt(m+1).
  const double c_f = rw * std::sqrt(m + 1.0);
  // ||grad||^2 = ||h||^2 + 1 + sum_j (w2_j sigma'_j)^2 (1 + ||x||^2)
  //           <= m + 1 + rw^2 * kSigP^2 * vx2.
  const double c_g = std::sqrt(m + 1.0 + rw * rw * kSigP * kSigP * vx2);
  // The Hessian is block diagonal over hidden units (plus the zero b2 row);
  // each block satisfies ||H_j|| <= |w2_j| |sigma''| ||(x,1)||^2
  //                                + 2 |sigma'| ||(x,1)||.
  const double c_h = rw * kSigPP * vx2 + 2.0 * kSigP * std::sqrt(vx2);
  return {c_f, c_g, c_h};
}

// ---- LinearUtility ----

double LinearUtility::value(std::span<const double> w,
                            std::span<const double> x) const {
  check_dims(w, x);
  return kern::dot(w.data(), x.data(), dim_);
}

void LinearUtility::grad(std::span<const double> w, std::span<const double> x,
                         std::span<double> g) const {
  check_dims(w, x);
  if (g.size() != w.size())
    throw DimensionMismatch("gradient buffer length mismatch");
  std::memcpy(g.data(), x.data(), sizeof(double) * dim_);
}

BoundConstants LinearUtility::bound_constants(double param_cap,
                                              double feature_cap) const {
  return {param_cap * feature_cap, feature_cap, 0.0};
}

// ---- CosineMixtureUtility ----

double CosineMixtureUtility::value(std::span<const double> w,
                                   std::span<const double> x) const {
  check_dims(w, x);
  const double s = kern::dot(w.data(), x.data(), dim_);
  return std::cos(2.0 * kPi * s) - 0.5 * s;
}

void CosineMixtureUtility::grad(std::span<const double> w,
                                std::span<const double> x,
                                std::span<double> g) const {
  check_dims(w, x);
  if (g.size() != w.size())
    throw DimensionMismatch("gradient buffer length mismatch");
  const double s = kern::dot(w.data(), x.data(), dim_);
  const double ds = -2.0 * kPi * std::sin(2.0 * kPi * s) - 0.5;
  for (int k = 0; k < dim_; ++k) g[k] = ds * x[k];
}

BoundConstants CosineMixtureUtility::bound_constants(double param_cap,
                                                     double feature_cap) const {
  const double s_max = param_cap * feature_cap;
  return {1.0 + 0.5 * s_max, (2.0 * kPi + 0.5) * feature_cap,
          4.0 * kPi * kPi * feature_cap * feature_cap};
}

std::unique_ptr<UtilityModel> make_model(const std::string& name,
                                         int input_dim, int hidden_dim) {
  if (name == "two_layer_sigmoid")
    return std::make_unique<TwoLayerSigmoidNet>(input_dim, hidden_dim);
  if (name == "linear") return std::make_unique<LinearUtility>(input_dim);
  if (name == "cosine_mixture")
    return std::make_unique<CosineMixtureUtility>(input_dim);
  throw ConfigError("unknown utility model '" + name + "'");
}

// ---- serialization ----

void write_params_binary(const std::string& path, const Vec& w) {
  static_assert(std::endian::native == std::endian::little,
                "binary checkpoint format assumes a little-endian host");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path + " for writing");
  const std::uint64_t n = w.size();
  out.write(reinterpret_cast<const char*>(&n), sizeof(n));
  out.write(reinterpret_cast<const char*>(w.data()),
            static_cast<std::streamsize>(sizeof(double) * w.size()));
  if (!out) throw IoError("short write to " + path);
}

Vec read_params_binary(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  std::uint64_t n = 0;
  in.read(reinterpret_cast<char*>(&n), sizeof(n));
  Vec w(n);
  in.read(reinterpret_cast<char*>(w.data()),
          static_cast<std::streamsize>(sizeof(double) * n));
  if (!in) throw IoError("short read from " + path);
  return w;
}

std::string params_to_json(const Vec& w) {
  return nlohmann::json(w).dump();
}

Vec params_from_json(const std::string& text) {
  return nlohmann::json::parse(text).get<Vec>();
}

}  // namespace mnl_lab
