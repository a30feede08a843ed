#include "fedsim/problems.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

namespace fedsim {

namespace {

void check_finite(const Vector& x, const char* where) {
    if (!x.allFinite()) throw NumericError(std::string(where) + ": non-finite input vector");
}

// softplus(-m) = log(1 + exp(-m)) without overflow for large |m|.
double logistic_loss(double margin) {
    if (margin > 0) return std::log1p(std::exp(-margin));
    return -margin + std::log1p(std::exp(margin));
}

// d/dm log(1+exp(-m)) = -sigmoid(-m)
double logistic_dloss(double margin) {
    if (margin > 0) {
        const double e = std::exp(-margin);
        return -e / (1.0 + e);
    }
    return -1.0 / (1.0 + std::exp(margin));
}

Vector gaussian_vector(int d, rng::Stream& s) {
    Vector z(d);
    for (int j = 0; j < d; ++j) z[j] = s.next_normal();
    return z;
}

} // namespace

QuadraticClient::QuadraticClient(Vector center, double sigma)
    : b_(std::move(center)), identity_(true), sigma_(sigma), L_(1.0) {
    if (sigma < 0) throw ConfigError("quadratic: sigma must be >= 0");
    if (b_.size() == 0) throw ConfigError("quadratic: empty center");
}

QuadraticClient::QuadraticClient(Vector center, Matrix curvature, double sigma)
    : b_(std::move(center)), A_(std::move(curvature)), identity_(false), sigma_(sigma) {
    if (sigma < 0) throw ConfigError("quadratic: sigma must be >= 0");
    if (A_.rows() != b_.size() || A_.cols() != b_.size())
        throw ConfigError("quadratic: curvature shape mismatch");
    Eigen::SelfAdjointEigenSolver<Matrix> es(A_, Eigen::EigenvaluesOnly);
    const double lo = es.eigenvalues().minCoeff();
    if (lo < -1e-10 * std::max(1.0, es.eigenvalues().maxCoeff()))
        throw ConfigError("quadratic: curvature must be positive semidefinite");
    L_ = std::max(0.0, es.eigenvalues().maxCoeff());
}

double QuadraticClient::eval(const Vector& x) const {
    const Vector r = x - b_;
    return identity_ ? 0.5 * r.squaredNorm() : 0.5 * r.dot(A_ * r);
}

Vector QuadraticClient::grad(const Vector& x) const {
    return identity_ ? Vector(x - b_) : Vector(A_ * (x - b_));
}

Vector QuadraticClient::stoch_grad(const Vector& x, rng::Stream& stream) const {
    check_finite(x, "QuadraticClient::stoch_grad");
    Vector g = grad(x);
    if (sigma_ > 0) {
        // Per-coordinate variance sigma^2/d so E||noise||^2 = sigma^2 exactly.
        g += std::sqrt(sigma_ * sigma_ / dim()) * gaussian_vector(dim(), stream);
    }
    return g;
}

LogisticClient::LogisticClient(Matrix features, Vector labels, double l2_reg,
                               int minibatch_size)
    : X_(std::move(features)), y_(std::move(labels)), l2_(l2_reg), batch_(minibatch_size) {
    if (X_.rows() == 0 || X_.cols() == 0) throw ConfigError("logistic: empty dataset");
    if (y_.size() != X_.rows()) throw ConfigError("logistic: labels/features mismatch");
    if (l2_ < 0) throw ConfigError("logistic: l2_reg must be >= 0");
    if (batch_ < 1 || batch_ > X_.rows())
        throw ConfigError("logistic: minibatch size must be in [1, n]");
    for (Eigen::Index j = 0; j < y_.size(); ++j) {
        if (y_[j] != 1.0 && y_[j] != -1.0)
            throw ConfigError("logistic: labels must be +-1");
    }
    // Standard bound: L <= lambda_max(X^T X) / (4n) + l2.
    Eigen::SelfAdjointEigenSolver<Matrix> es(X_.transpose() * X_, Eigen::EigenvaluesOnly);
    L_ = es.eigenvalues().maxCoeff() / (4.0 * static_cast<double>(X_.rows())) + l2_;
}

double LogisticClient::eval(const Vector& w) const {
    double acc = 0.0;
    for (Eigen::Index j = 0; j < X_.rows(); ++j) {
        acc += logistic_loss(y_[j] * X_.row(j).dot(w));
    }
    return acc / static_cast<double>(X_.rows()) + 0.5 * l2_ * w.squaredNorm();
}

Vector LogisticClient::sample_grad(const Vector& w, Eigen::Index j) const {
    const double m = y_[j] * X_.row(j).dot(w);
    return Vector(logistic_dloss(m) * y_[j] * X_.row(j).transpose() + l2_ * w);
}

Vector LogisticClient::grad(const Vector& w) const {
    Vector g = Vector::Zero(dim());
    for (Eigen::Index j = 0; j < X_.rows(); ++j) {
        const double m = y_[j] * X_.row(j).dot(w);
        g += logistic_dloss(m) * y_[j] * X_.row(j).transpose();
    }
    return Vector(g / static_cast<double>(X_.rows()) + l2_ * w);
}

Vector LogisticClient::stoch_grad(const Vector& w, rng::Stream& stream) const {
    check_finite(w, "LogisticClient::stoch_grad");
    Vector g = Vector::Zero(dim());
    for (int k = 0; k < batch_; ++k) {
        const auto j = static_cast<Eigen::Index>(
            stream.next_below(static_cast<std::uint64_t>(X_.rows())));
        g += sample_grad(w, j);
    }
    return Vector(g / static_cast<double>(batch_));
}

double LogisticClient::noise_second_moment(const Vector& w) const {
    const Vector mean = grad(w);
    double tr = 0.0;
    for (Eigen::Index j = 0; j < X_.rows(); ++j) {
        tr += (sample_grad(w, j) - mean).squaredNorm();
    }
    tr /= static_cast<double>(X_.rows());
    return tr / static_cast<double>(batch_);
}

double GlobalObjective::eval(const Vector& x) const {
    double acc = 0.0;
    for (const auto& c : clients) acc += c->eval(x);
    return acc / static_cast<double>(clients.size());
}

Vector GlobalObjective::grad(const Vector& x) const {
    Vector g = Vector::Zero(dim);
    for (const auto& c : clients) g += c->grad(x);
    return Vector(g / static_cast<double>(clients.size()));
}

GlobalObjective make_quadratic_ensemble(int N, int d, double heterogeneity_radius,
                                        double sigma, std::uint64_t seed,
                                        const Vector* x_star, const Vector* x0) {
    if (N < 1 || d < 1) throw ConfigError("quadratic ensemble: need N >= 1 and d >= 1");
    if (heterogeneity_radius < 0) throw ConfigError("quadratic ensemble: radius must be >= 0");
    if (sigma < 0) throw ConfigError("quadratic ensemble: sigma must be >= 0");

    const Vector target = x_star ? *x_star : Vector(Vector::Zero(d));
    const Vector start = x0 ? *x0 : Vector(Vector::Zero(d));
    if (target.size() != d || start.size() != d)
        throw ConfigError("quadratic ensemble: x_star/x0 dimension mismatch");

    // Centers uniform in the radius-r ball, then recentered onto the target
    // so the global minimizer is exact by construction.
    std::vector<Vector> centers;
    centers.reserve(static_cast<std::size_t>(N));
    Vector mean = Vector::Zero(d);
    for (int i = 0; i < N; ++i) {
        auto s = rng::substream(seed, "problem-centers", static_cast<std::uint64_t>(i));
        Vector dir = gaussian_vector(d, s);
        const double norm = dir.norm();
        if (norm > 0) dir /= norm;
        const double radius =
            heterogeneity_radius * std::pow(s.next_double(), 1.0 / static_cast<double>(d));
        centers.push_back(Vector(radius * dir));
        mean += centers.back();
    }
    mean /= static_cast<double>(N);

    GlobalObjective g;
    g.dim = d;
    g.L = 1.0;
    g.sigma = sigma;
    g.x0 = start;
    g.x_star = target;
    g.x_star_known = true;

    double f_star = 0.0;
    double F0 = 0.0;
    for (int i = 0; i < N; ++i) {
        Vector b = centers[static_cast<std::size_t>(i)] - mean + target;
        f_star += 0.5 * (target - b).squaredNorm();
        F0 += (start - b).squaredNorm();
        g.clients.push_back(std::make_shared<QuadraticClient>(std::move(b), sigma));
    }
    g.f_star = f_star / N;
    g.F0 = F0 / N;
    g.delta_f = g.eval(start) - *g.f_star;
    return g;
}

DirichletPartition dirichlet_partition(int num_classes, int N, double alpha,
                                       int samples_per_class, std::uint64_t seed) {
    if (num_classes < 1 || N < 1) throw ConfigError("dirichlet: need classes >= 1, N >= 1");
    if (alpha <= 0) throw ConfigError("dirichlet: alpha must be > 0");
    if (samples_per_class < 1) throw ConfigError("dirichlet: samples_per_class must be >= 1");

    DirichletPartition out;
    out.proportions = Matrix::Zero(num_classes, N);
    out.counts.assign(static_cast<std::size_t>(num_classes), {});

    for (int c = 0; c < num_classes; ++c) {
        // Gamma draws normalized to a Dirichlet row; a row whose sum
        // underflows to zero is degenerate and gets redrawn.
        Eigen::RowVectorXd row(N);
        for (std::uint64_t attempt = 0;; ++attempt) {
            auto s = rng::substream(seed, "dirichlet", static_cast<std::uint64_t>(c), attempt);
            for (int i = 0; i < N; ++i) row[i] = rng::sample_gamma(s, alpha);
            if (row.sum() > 0) break;
            ++out.resampled_rows;
        }
        row /= row.sum();
        out.proportions.row(c) = row;

        // Largest-remainder rounding: counts sum exactly to samples_per_class.
        std::vector<int> cnt(static_cast<std::size_t>(N));
        std::vector<std::pair<double, int>> rem;
        int used = 0;
        for (int i = 0; i < N; ++i) {
            const double exact = row[i] * samples_per_class;
            cnt[static_cast<std::size_t>(i)] = static_cast<int>(std::floor(exact));
            used += cnt[static_cast<std::size_t>(i)];
            rem.emplace_back(exact - std::floor(exact), i);
        }
        std::sort(rem.begin(), rem.end(), [](const auto& a, const auto& b) {
            if (a.first != b.first) return a.first > b.first;
            return a.second < b.second;
        });
        for (int k = 0; k < samples_per_class - used; ++k)
            ++cnt[static_cast<std::size_t>(rem[static_cast<std::size_t>(k)].second)];
        out.counts[static_cast<std::size_t>(c)] = std::move(cnt);
    }
    return out;
}

GlobalObjective make_logistic_ensemble(int N, int d, int samples_per_class,
                                       double alpha, double l2_reg, int minibatch,
                                       std::uint64_t seed, const Vector* x0) {
    if (N < 1 || d < 1) throw ConfigError("logistic ensemble: need N >= 1 and d >= 1");
    const int num_classes = 2;
    const auto part = dirichlet_partition(num_classes, N, alpha, samples_per_class, seed);

    // Two planted class clouds at +-mu.
    auto sm = rng::substream(seed, "problem-direction");
    Vector mu = gaussian_vector(d, sm);
    if (mu.norm() > 0) mu *= 1.5 / mu.norm();

    const Vector start = x0 ? *x0 : Vector(Vector::Zero(d));
    if (start.size() != d) throw ConfigError("logistic ensemble: x0 dimension mismatch");

    GlobalObjective g;
    g.dim = d;
    g.x0 = start;
    g.x_star_known = false;

    double L = 0.0;
    double F0 = 0.0;
    double sigma_sq = 0.0;
    for (int i = 0; i < N; ++i) {
        int rows = 0;
        for (int c = 0; c < num_classes; ++c) rows += part.counts[static_cast<std::size_t>(c)][static_cast<std::size_t>(i)];
        // A client that drew no mass still needs one sample to be a valid
        // objective; give it one from class 0.
        std::vector<int> quota = {part.counts[0][static_cast<std::size_t>(i)],
                                  part.counts[1][static_cast<std::size_t>(i)]};
        if (rows == 0) {
            quota[0] = 1;
            rows = 1;
        }
        Matrix X(rows, d);
        Vector y(rows);
        int r = 0;
        for (int c = 0; c < num_classes; ++c) {
            const double label = c == 0 ? 1.0 : -1.0;
            for (int k = 0; k < quota[static_cast<std::size_t>(c)]; ++k, ++r) {
                auto s = rng::substream(seed, "problem-samples",
                                        static_cast<std::uint64_t>(i),
                                        static_cast<std::uint64_t>(c),
                                        static_cast<std::uint64_t>(k));
                X.row(r) = (label * mu + gaussian_vector(d, s)).transpose();
                y[r] = label;
            }
        }
        auto client = std::make_shared<LogisticClient>(std::move(X), std::move(y), l2_reg,
                                                       std::min(minibatch, rows));
        L = std::max(L, client->lipschitz());
        F0 += client->grad(start).squaredNorm();
        sigma_sq = std::max(sigma_sq, client->noise_second_moment(start));
        g.clients.push_back(std::move(client));
    }
    g.L = L;
    g.F0 = F0 / N;
    g.sigma = std::sqrt(sigma_sq); // diagnostic at x0; see header
    return g;
}

} // namespace fedsim
