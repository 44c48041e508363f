#include "kernseg/acm.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "kernseg/errors.hpp"

namespace kernseg {

void AcmConfig::validate() const {
    if (max_iters <= 0 || reinit_every <= 0 || stop_window <= 0 || backtrack_steps < 0)
        throw DomainError("AcmConfig: iteration counts must be positive");
    if (!(step_size > 0) || !(mu >= 0) || !(dirac_width > 0))
        throw DomainError("AcmConfig: step_size and dirac_width must be positive, mu nonnegative");
}

namespace {

constexpr double kFar = 1e20;

/// 1-D squared distance transform (lower envelope of parabolas).
void edt_1d(const std::vector<double>& f, std::vector<double>& d, std::vector<int>& v, std::vector<double>& z) {
    const int n = static_cast<int>(f.size());
    int k = 0;
    v[0] = 0;
    z[0] = -std::numeric_limits<double>::infinity();
    z[1] = std::numeric_limits<double>::infinity();
    for (int q = 1; q < n; ++q) {
        double s;
        for (;;) {
            s = ((f[q] + q * double(q)) - (f[v[k]] + v[k] * double(v[k]))) / (2.0 * q - 2.0 * v[k]);
            if (s <= z[k] && k > 0) {
                --k;
                continue;
            }
            if (s <= z[k]) {
                // k == 0 and the new parabola dominates everywhere
                v[0] = q;
                z[0] = -std::numeric_limits<double>::infinity();
                z[1] = std::numeric_limits<double>::infinity();
                k = -1;
            }
            break;
        }
        if (k >= 0) {
            ++k;
            v[k] = q;
            z[k] = s;
            z[k + 1] = std::numeric_limits<double>::infinity();
        } else {
            k = 0;
        }
    }
    k = 0;
    for (int q = 0; q < n; ++q) {
        while (z[k + 1] < q) ++k;
        const double dq = q - v[k];
        d[q] = dq * dq + f[v[k]];
    }
}

/// Squared Euclidean distance from every pixel to the nearest pixel where `feature` is true.
Eigen::MatrixXd squared_edt(const Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic>& feature) {
    const int rows = static_cast<int>(feature.rows()), cols = static_cast<int>(feature.cols());
    Eigen::MatrixXd g(rows, cols);
    const int n = std::max(rows, cols);
    std::vector<double> f(n), d(n), z(n + 1);
    std::vector<int> v(n);
    for (int c = 0; c < cols; ++c) {
        f.resize(rows);
        d.resize(rows);
        for (int r = 0; r < rows; ++r) f[r] = feature(r, c) ? 0.0 : kFar;
        edt_1d(f, d, v, z);
        for (int r = 0; r < rows; ++r) g(r, c) = d[r];
    }
    for (int r = 0; r < rows; ++r) {
        f.resize(cols);
        d.resize(cols);
        for (int c = 0; c < cols; ++c) f[c] = g(r, c);
        edt_1d(f, d, v, z);
        for (int c = 0; c < cols; ++c) g(r, c) = d[c];
    }
    return g;
}

Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic> inside_of(const SegMask& mask) {
    Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic> in(mask.height, mask.width);
    for (int r = 0; r < mask.height; ++r)
        for (int c = 0; c < mask.width; ++c) in(r, c) = mask.at(r, c);
    return in;
}

struct RegionMeans {
    double inside;
    double outside;
};

RegionMeans region_means(const ImageGrid& image, const Eigen::MatrixXd& phi) {
    double sum_in = 0, sum_out = 0;
    std::size_t n_in = 0, n_out = 0;
    for (int r = 0; r < image.height; ++r)
        for (int c = 0; c < image.width; ++c) {
            const double v = image.at(r, c);
            if (phi(r, c) > 0) {
                sum_in += v;
                ++n_in;
            } else {
                sum_out += v;
                ++n_out;
            }
        }
    const double global = (sum_in + sum_out) / static_cast<double>(n_in + n_out);
    return {n_in ? sum_in / static_cast<double>(n_in) : global, n_out ? sum_out / static_cast<double>(n_out) : global};
}

double energy_of(const ImageGrid& image, const Eigen::MatrixXd& phi, double mu) {
    const RegionMeans m = region_means(image, phi);
    double data = 0.0;
    std::size_t edges = 0;
    for (int r = 0; r < image.height; ++r)
        for (int c = 0; c < image.width; ++c) {
            const bool in = phi(r, c) > 0;
            const double diff = image.at(r, c) - (in ? m.inside : m.outside);
            data += diff * diff;
            if (c + 1 < image.width && in != (phi(r, c + 1) > 0)) ++edges;
            if (r + 1 < image.height && in != (phi(r + 1, c) > 0)) ++edges;
        }
    return data + mu * static_cast<double>(edges);
}

/// Mean curvature div(∇φ/|∇φ|) by central differences with replicated borders.
Eigen::MatrixXd curvature(const Eigen::MatrixXd& phi) {
    const Eigen::Index rows = phi.rows(), cols = phi.cols();
    Eigen::MatrixXd k(rows, cols);
    auto at = [&](Eigen::Index r, Eigen::Index c) {
        return phi(std::clamp<Eigen::Index>(r, 0, rows - 1), std::clamp<Eigen::Index>(c, 0, cols - 1));
    };
    for (Eigen::Index r = 0; r < rows; ++r)
        for (Eigen::Index c = 0; c < cols; ++c) {
            const double px = 0.5 * (at(r, c + 1) - at(r, c - 1));
            const double py = 0.5 * (at(r + 1, c) - at(r - 1, c));
            const double pxx = at(r, c + 1) - 2 * at(r, c) + at(r, c - 1);
            const double pyy = at(r + 1, c) - 2 * at(r, c) + at(r - 1, c);
            const double pxy = 0.25 * (at(r + 1, c + 1) - at(r + 1, c - 1) - at(r - 1, c + 1) + at(r - 1, c - 1));
            const double g2 = px * px + py * py;
            k(r, c) = (pxx * py * py - 2 * px * py * pxy + pyy * px * px) / std::pow(g2 + 1e-8, 1.5);
        }
    return k;
}

}  // namespace

LevelSet mask_to_sdf(const SegMask& mask) {
    const std::size_t n = mask.count();
    if (n == 0 || n == mask.size()) throw DomainError("mask_to_sdf: mask must be neither empty nor full");
    const auto in = inside_of(mask);
    const Eigen::MatrixXd to_inside = squared_edt(in);
    const Eigen::MatrixXd to_outside = squared_edt(in.unaryExpr([](bool b) { return !b; }));
    LevelSet ls;
    ls.phi.resize(mask.height, mask.width);
    for (int r = 0; r < mask.height; ++r)
        for (int c = 0; c < mask.width; ++c)
            ls.phi(r, c) = in(r, c) ? std::sqrt(to_outside(r, c)) - 0.5 : -(std::sqrt(to_inside(r, c)) - 0.5);
    return ls;
}

LevelSet reinitialize(const LevelSet& ls) {
    const Eigen::MatrixXd& phi = ls.phi;
    const Eigen::Index rows = phi.rows(), cols = phi.cols();
    Eigen::MatrixXd d = Eigen::MatrixXd::Constant(rows, cols, kFar);
    Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic> fixed =
        Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic>::Constant(rows, cols, false);

    // Interface pixels: distance to the linearly interpolated zero crossing along each axis.
    const Eigen::Index dr[4] = {0, 0, 1, -1}, dc[4] = {1, -1, 0, 0};
    bool any = false;
    for (Eigen::Index r = 0; r < rows; ++r)
        for (Eigen::Index c = 0; c < cols; ++c) {
            const bool in = phi(r, c) > 0;
            for (int q = 0; q < 4; ++q) {
                const Eigen::Index rr = r + dr[q], cc = c + dc[q];
                if (rr < 0 || rr >= rows || cc < 0 || cc >= cols) continue;
                if ((phi(rr, cc) > 0) == in) continue;
                const double denom = phi(r, c) - phi(rr, cc);
                double theta = denom != 0 ? phi(r, c) / denom : 0.5;
                theta = std::clamp(std::abs(theta), 0.0, 1.0);
                // keep the crossing on the correct side of the pixel center
                d(r, c) = std::min(d(r, c), std::max(theta, 1e-3));
                fixed(r, c) = true;
                any = true;
            }
        }
    if (!any) throw DomainError("reinitialize: level set has no zero crossing");

    auto update = [&](Eigen::Index r, Eigen::Index c) {
        if (fixed(r, c)) return;
        const double a = std::min(c > 0 ? d(r, c - 1) : kFar, c + 1 < cols ? d(r, c + 1) : kFar);
        const double b = std::min(r > 0 ? d(r - 1, c) : kFar, r + 1 < rows ? d(r + 1, c) : kFar);
        double cand;
        if (std::abs(a - b) >= 1.0)
            cand = std::min(a, b) + 1.0;
        else
            cand = 0.5 * (a + b + std::sqrt(2.0 - (a - b) * (a - b)));
        d(r, c) = std::min(d(r, c), cand);
    };
    for (int round = 0; round < 2; ++round) {
        for (Eigen::Index r = 0; r < rows; ++r)
            for (Eigen::Index c = 0; c < cols; ++c) update(r, c);
        for (Eigen::Index r = 0; r < rows; ++r)
            for (Eigen::Index c = cols - 1; c >= 0; --c) update(r, c);
        for (Eigen::Index r = rows - 1; r >= 0; --r)
            for (Eigen::Index c = 0; c < cols; ++c) update(r, c);
        for (Eigen::Index r = rows - 1; r >= 0; --r)
            for (Eigen::Index c = cols - 1; c >= 0; --c) update(r, c);
    }
    LevelSet out;
    out.iteration = ls.iteration;
    out.phi.resize(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r)
        for (Eigen::Index c = 0; c < cols; ++c) out.phi(r, c) = phi(r, c) > 0 ? d(r, c) : -d(r, c);
    return out;
}

SegMask mask_from_levelset(const LevelSet& ls) {
    SegMask m(static_cast<int>(ls.phi.cols()), static_cast<int>(ls.phi.rows()));
    for (int r = 0; r < m.height; ++r)
        for (int c = 0; c < m.width; ++c) m.set(r, c, ls.phi(r, c) > 0);
    return m;
}

double cv_energy(const ImageGrid& image, const LevelSet& ls, double mu) {
    if (ls.phi.rows() != image.height || ls.phi.cols() != image.width)
        throw DomainError("cv_energy: level set and image dimensions differ");
    return energy_of(image, ls.phi, mu);
}

AcmResult evolve(const ImageGrid& image, const SegMask& init, const AcmConfig& cfg) {
    cfg.validate();
    if (!init.same_shape(image)) throw DomainError("evolve: initial mask and image dimensions differ");
    LevelSet ls = mask_to_sdf(init);
    double energy = energy_of(image, ls.phi, cfg.mu);
    AcmResult res;
    res.energy_trace.push_back(energy);

    constexpr double kScale = 255.0 * 255.0;
    int stalled = 0;
    int accepted = 0;
    for (int it = 1; it <= cfg.max_iters; ++it) {
        res.iterations = it;
        const RegionMeans m = region_means(image, ls.phi);
        const Eigen::MatrixXd kappa = curvature(ls.phi);
        Eigen::MatrixXd force(ls.phi.rows(), ls.phi.cols());
        for (int r = 0; r < image.height; ++r)
            for (int c = 0; c < image.width; ++c) {
                const double v = image.at(r, c);
                const double f = (cfg.mu * kappa(r, c) + (v - m.outside) * (v - m.outside) -
                                  (v - m.inside) * (v - m.inside)) /
                                 kScale;
                const double p = ls.phi(r, c);
                const double delta = (cfg.dirac_width / std::numbers::pi) / (cfg.dirac_width * cfg.dirac_width + p * p);
                force(r, c) = delta * f;
            }
        const double peak = force.cwiseAbs().maxCoeff();
        if (!std::isfinite(peak)) throw NumericalError("evolve: non-finite level-set update");
        if (peak == 0.0) break;

        bool moved = false;
        double dt = cfg.step_size / peak;
        for (int attempt = 0; attempt <= cfg.backtrack_steps; ++attempt, dt *= 0.5) {
            Eigen::MatrixXd cand = ls.phi + dt * force;
            if (!cand.allFinite()) throw NumericalError("evolve: level set diverged");
            const double e = energy_of(image, cand, cfg.mu);
            if (e <= energy) {
                stalled = e < energy ? 0 : stalled + 1;
                ls.phi = std::move(cand);
                energy = e;
                moved = true;
                break;
            }
        }
        if (!moved) break;  // every trial step raises the energy
        res.energy_trace.push_back(energy);
        ++accepted;
        if (accepted % cfg.reinit_every == 0) ls = reinitialize(ls);
        if (stalled >= cfg.stop_window) break;
    }
    ls.iteration = res.iterations;
    res.mask = mask_from_levelset(ls);
    res.level_set = std::move(ls);
    return res;
}

}  // namespace kernseg
