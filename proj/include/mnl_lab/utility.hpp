#pragma once

// Parametric utility function classes f_w with exact values, hand-derived
// gradients, and conservative bound constants. No general autodiff; each
// class implements its own backward pass.

#include <memory>
#include <span>
#include <string>

#include "mnl_lab/core.hpp"

namespace mnl_lab {

// Conservative bounds for |f|, ||grad f||_2 and the Hessian operator norm,
// valid whenever ||w||_2 <= param_cap and ||x||_2 <= feature_cap.
struct BoundConstants {
  double c_f;
  double c_g;
  double c_h;
};

class UtilityModel {
 public:
  virtual ~UtilityModel() = default;

  virtual std::string name() const = 0;
  virtual int param_dim() const = 0;
  virtual int input_dim() const = 0;

  // f_w(x). Throws DimensionMismatch on size errors.
  virtual double value(std::span<const double> w,
                       std::span<const double> x) const = 0;

  // Gradient of f_w(x) with respect to w, written into grad (length d_w).
  virtual void grad(std::span<const double> w, std::span<const double> x,
                    std::span<double> grad) const = 0;

  // Fused value + gradient; default recomputes.
  virtual double value_and_grad(std::span<const double> w,
                                std::span<const double> x,
                                std::span<double> g) const {
    grad(w, x, g);
    return value(w, x);
  }

  // Closed-form bounds, monotone in both caps.
  virtual BoundConstants bound_constants(double param_cap,
                                         double feature_cap) const = 0;

 protected:
  void check_dims(std::span<const double> w, std::span<const double> x) const;
};

// value(w, x) = w2^T sigmoid(W1 x + b1) + b2, parameters flattened as
// [W1 row-major (m x d), b1 (m), w2 (m), b2 (1)], d_w = m*d + 2m + 1.
class TwoLayerSigmoidNet final : public UtilityModel {
 public:
  TwoLayerSigmoidNet(int input_dim, int hidden_dim);

  std::string name() const override { return "two_layer_sigmoid"; }
  int param_dim() const override { return hidden_ * dim_ + 2 * hidden_ + 1; }
  int input_dim() const override { return dim_; }
  int hidden_dim() const { return hidden_; }

  double value(std::span<const double> w,
               std::span<const double> x) const override;
  void grad(std::span<const double> w, std::span<const double> x,
            std::span<double> g) const override;
  double value_and_grad(std::span<const double> w, std::span<const double> x,
                        std::span<double> g) const override;
  BoundConstants bound_constants(double param_cap,
                                 double feature_cap) const override;

 private:
  int dim_;
  int hidden_;
};

// value(w, x) = w . x
class LinearUtility final : public UtilityModel {
 public:
  explicit LinearUtility(int input_dim) : dim_(input_dim) {}

  std::string name() const override { return "linear"; }
  int param_dim() const override { return dim_; }
  int input_dim() const override { return dim_; }

  double value(std::span<const double> w,
               std::span<const double> x) const override;
  void grad(std::span<const double> w, std::span<const double> x,
            std::span<double> g) const override;
  BoundConstants bound_constants(double param_cap,
                                 double feature_cap) const override;

 private:
  int dim_;
};

// value(w, x) = cos(2 pi (x.w)) - (x.w)/2. Used as a ground truth outside
// the estimator class in the misspecified setting; still differentiable in w.
class CosineMixtureUtility final : public UtilityModel {
 public:
  explicit CosineMixtureUtility(int input_dim) : dim_(input_dim) {}

  std::string name() const override { return "cosine_mixture"; }
  int param_dim() const override { return dim_; }
  int input_dim() const override { return dim_; }

  double value(std::span<const double> w,
               std::span<const double> x) const override;
  void grad(std::span<const double> w, std::span<const double> x,
            std::span<double> g) const override;
  BoundConstants bound_constants(double param_cap,
                                 double feature_cap) const override;

 private:
  int dim_;
};

std::unique_ptr<UtilityModel> make_model(const std::string& name,
                                         int input_dim, int hidden_dim);

// ---- parameter vector serialization ----

// Flat little-endian doubles.
void write_params_binary(const std::string& path, const Vec& w);
Vec read_params_binary(const std::string& path);

std::string params_to_json(const Vec& w);
Vec params_from_json(const std::string& text);

}  // namespace mnl_lab
