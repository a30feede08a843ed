#pragma once

// Synthetic client objectives with exact gradients and seeded stochastic
// oracles. The global objective is the plain average f = (1/N) sum_i f_i.
//
// Stochastic gradients satisfy the usual two assumptions: unbiasedness and
// E||noise||^2 <= sigma^2. For quadratics the noise is Gaussian with
// per-coordinate variance sigma^2/d, which makes the second moment exactly
// sigma^2 — handy for the variance-bound tests, which check the aggregated
// noise against N*K*sigma^2 with a tight constant.

#include <cstdint>
#include <memory>
#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "fedsim/errors.hpp"
#include "fedsim/rng.hpp"

namespace fedsim {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

class ClientObjective {
public:
    virtual ~ClientObjective() = default;
    virtual int dim() const = 0;
    virtual double eval(const Vector& x) const = 0;
    virtual Vector grad(const Vector& x) const = 0;
    // Unbiased stochastic gradient. Throws NumericError on non-finite x.
    virtual Vector stoch_grad(const Vector& x, rng::Stream& stream) const = 0;
    // Smoothness constant of this client's gradient.
    virtual double lipschitz() const = 0;
};

// f_i(x) = 1/2 (x - b)^T A (x - b); A defaults to the identity.
class QuadraticClient final : public ClientObjective {
public:
    QuadraticClient(Vector center, double sigma);
    QuadraticClient(Vector center, Matrix curvature, double sigma);

    int dim() const override { return static_cast<int>(b_.size()); }
    double eval(const Vector& x) const override;
    Vector grad(const Vector& x) const override;
    Vector stoch_grad(const Vector& x, rng::Stream& stream) const override;
    double lipschitz() const override { return L_; }

    const Vector& center() const { return b_; }
    double sigma() const { return sigma_; }

private:
    Vector b_;
    Matrix A_;       // empty when identity
    bool identity_;
    double sigma_;
    double L_;
};

// Binary l2-regularized logistic regression on a fixed local dataset;
// stochastic gradients average a uniformly resampled minibatch
// (with replacement — i.i.d. local samples).
class LogisticClient final : public ClientObjective {
public:
    LogisticClient(Matrix features, Vector labels, double l2_reg, int minibatch_size);

    int dim() const override { return static_cast<int>(X_.cols()); }
    double eval(const Vector& w) const override;
    Vector grad(const Vector& w) const override;
    Vector stoch_grad(const Vector& w, rng::Stream& stream) const override;
    double lipschitz() const override { return L_; }

    int n_samples() const { return static_cast<int>(X_.rows()); }
    int minibatch_size() const { return batch_; }

    // Exact second moment of the minibatch gradient noise at w:
    // tr Cov(per-sample grad) / batch. Used to calibrate sigma.
    double noise_second_moment(const Vector& w) const;

private:
    Vector sample_grad(const Vector& w, Eigen::Index j) const;
    Matrix X_;
    Vector y_;
    double l2_;
    int batch_;
    double L_;
};

struct GlobalObjective {
    std::vector<std::shared_ptr<const ClientObjective>> clients;
    int dim = 0;
    double L = 0.0;                   // max_i L_i
    double sigma = 0.0;               // noise bound (exact for quadratics)
    std::optional<double> f_star;     // known for quadratic ensembles
    std::optional<double> delta_f;    // f(x0) - f_star when f_star known
    double F0 = 0.0;                  // (1/N) sum ||grad f_i(x0)||^2
    Vector x0;
    Vector x_star;                    // empty when unknown
    bool x_star_known = false;

    int N() const { return static_cast<int>(clients.size()); }
    double eval(const Vector& x) const;
    Vector grad(const Vector& x) const;
};

// N identity-curvature quadratics with centers sampled uniformly in the ball
// of the given radius, then recentered so mean(b_i) = x_star (the global
// minimizer). Reports exact L = 1, f*, delta_f and F0 for the configured x0.
// Defaults: x_star = 0, x0 = 0.
GlobalObjective make_quadratic_ensemble(int N, int d, double heterogeneity_radius,
                                        double sigma, std::uint64_t seed,
                                        const Vector* x_star = nullptr,
                                        const Vector* x0 = nullptr);

// Dirichlet(alpha) split of each class's sample mass across N clients.
struct DirichletPartition {
    Matrix proportions;                 // num_classes x N, rows sum to 1
    std::vector<std::vector<int>> counts; // counts[c][i], rows sum to samples_per_class
    int resampled_rows = 0;             // degenerate draws that were retried
};
DirichletPartition dirichlet_partition(int num_classes, int N, double alpha,
                                       int samples_per_class, std::uint64_t seed);

// Logistic ensemble: two Gaussian class clouds, labels from the planted class,
// per-client class mix from dirichlet_partition (small alpha = highly skewed
// clients). f* is unknown; sigma is a measured-at-x0 diagnostic.
GlobalObjective make_logistic_ensemble(int N, int d, int samples_per_class,
                                       double alpha, double l2_reg, int minibatch,
                                       std::uint64_t seed, const Vector* x0 = nullptr);

} // namespace fedsim
