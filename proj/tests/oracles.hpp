// Test-side oracles, independent of the library implementation: Boltzmann
// bin probabilities by quadrature, a direct Boltzmann sampler by inverse CDF,
// and the brute-force pair-acceptance expectation. Potentials are restated
// here on purpose; these must not share code with the paths they check.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numeric>
#include <vector>

namespace oracle {

inline constexpr double kB = 0.0019872041;  // kcal mol^-1 K^-1

inline double double_well(double a, double b, double x) { return a * x * x * x * x - b * x * x; }

inline double torsion(double amp_phi, double amp_psi, double coupling, double phi_deg, double psi_deg) {
    const double d2r = 3.14159265358979323846 / 180.0;
    const double phi = phi_deg * d2r;
    const double psi = psi_deg * d2r;
    return amp_phi * (1.0 - std::cos(phi)) + amp_psi * (1.0 - std::cos(psi)) +
           coupling * std::cos(phi + psi);
}

// Boltzmann probability of each of `bins` equal bins over [lo, hi] for a 1-D
// potential, via trapezoid quadrature on `points` grid nodes.
inline std::vector<double> bin_probabilities(const std::function<double(double)>& u, double temperature,
                                             double lo, double hi, int bins, int points = 2001) {
    const double beta = 1.0 / (kB * temperature);
    const double dx = (hi - lo) / (points - 1);
    std::vector<double> weight(static_cast<std::size_t>(points));
    for (int k = 0; k < points; ++k) {
        const double x = lo + k * dx;
        weight[static_cast<std::size_t>(k)] = std::exp(-beta * u(x));
    }
    std::vector<double> prob(static_cast<std::size_t>(bins), 0.0);
    double total = 0.0;
    for (int k = 0; k + 1 < points; ++k) {
        const double xmid = lo + (k + 0.5) * dx;
        const double piece = 0.5 * (weight[static_cast<std::size_t>(k)] + weight[static_cast<std::size_t>(k + 1)]) * dx;
        int bin = static_cast<int>((xmid - lo) / (hi - lo) * bins);
        if (bin >= bins) bin = bins - 1;
        prob[static_cast<std::size_t>(bin)] += piece;
        total += piece;
    }
    for (auto& p : prob) p /= total;
    return prob;
}

// Inverse-CDF sampler over a fixed grid; exact draws from the discretized
// Boltzmann density.
class DirectSampler {
public:
    DirectSampler(const std::function<double(double)>& u, double temperature, double lo, double hi,
                  int points = 2001)
        : lo_(lo), dx_((hi - lo) / (points - 1)) {
        const double beta = 1.0 / (kB * temperature);
        cdf_.resize(static_cast<std::size_t>(points), 0.0);
        double acc = 0.0;
        double prev = std::exp(-beta * u(lo));
        for (int k = 1; k < points; ++k) {
            const double w = std::exp(-beta * u(lo + k * dx_));
            acc += 0.5 * (prev + w) * dx_;
            cdf_[static_cast<std::size_t>(k)] = acc;
            prev = w;
        }
        for (auto& c : cdf_) c /= acc;
    }

    double sample(double uniform01) const {
        auto it = std::lower_bound(cdf_.begin(), cdf_.end(), uniform01);
        if (it == cdf_.begin()) return lo_;
        const std::size_t k = static_cast<std::size_t>(it - cdf_.begin());
        if (k >= cdf_.size()) return lo_ + dx_ * static_cast<double>(cdf_.size() - 1);
        const double c0 = cdf_[k - 1];
        const double c1 = cdf_[k];
        const double frac = c1 > c0 ? (uniform01 - c0) / (c1 - c0) : 0.0;
        return lo_ + dx_ * (static_cast<double>(k - 1) + frac);
    }

private:
    double lo_;
    double dx_;
    std::vector<double> cdf_;
};

// E[min(1, exp(-(beta_i - beta_j)(U(y) - U(x))))] with x ~ p_i, y ~ p_j, by
// 2-D quadrature; the expected acceptance of a temperature swap between
// equilibrated neighbors.
inline double expected_temperature_acceptance(const std::function<double(double)>& u,
                                              double temperature_i, double temperature_j, double lo,
                                              double hi, int points = 801) {
    const double beta_i = 1.0 / (kB * temperature_i);
    const double beta_j = 1.0 / (kB * temperature_j);
    const double dx = (hi - lo) / (points - 1);

    std::vector<double> ui(static_cast<std::size_t>(points)), pi(ui), pj(ui);
    double zi = 0.0, zj = 0.0;
    for (int k = 0; k < points; ++k) {
        const double x = lo + k * dx;
        ui[static_cast<std::size_t>(k)] = u(x);
        const double edge = (k == 0 || k == points - 1) ? 0.5 : 1.0;  // trapezoid weights
        pi[static_cast<std::size_t>(k)] = edge * std::exp(-beta_i * ui[static_cast<std::size_t>(k)]);
        pj[static_cast<std::size_t>(k)] = edge * std::exp(-beta_j * ui[static_cast<std::size_t>(k)]);
        zi += pi[static_cast<std::size_t>(k)];
        zj += pj[static_cast<std::size_t>(k)];
    }
    double acc = 0.0;
    for (int a = 0; a < points; ++a) {
        for (int b = 0; b < points; ++b) {
            const double delta = (beta_i - beta_j) * (ui[static_cast<std::size_t>(b)] - ui[static_cast<std::size_t>(a)]);
            const double prob = delta <= 0.0 ? 1.0 : std::exp(-delta);
            acc += pi[static_cast<std::size_t>(a)] * pj[static_cast<std::size_t>(b)] * prob;
        }
    }
    return acc / (zi * zj);
}

// L1 distance between an empirical histogram (raw counts) and oracle bin
// probabilities.
inline double l1_distance(const std::vector<long>& counts, const std::vector<double>& prob) {
    long total = std::accumulate(counts.begin(), counts.end(), 0L);
    double l1 = 0.0;
    for (std::size_t b = 0; b < counts.size(); ++b)
        l1 += std::abs(static_cast<double>(counts[b]) / static_cast<double>(total) - prob[b]);
    return l1;
}

inline std::vector<long> histogram(const std::vector<double>& samples, double lo, double hi, int bins) {
    std::vector<long> counts(static_cast<std::size_t>(bins), 0);
    for (double x : samples) {
        if (x < lo || x >= hi) continue;
        int bin = static_cast<int>((x - lo) / (hi - lo) * bins);
        if (bin >= bins) bin = bins - 1;
        counts[static_cast<std::size_t>(bin)] += 1;
    }
    return counts;
}

}  // namespace oracle
