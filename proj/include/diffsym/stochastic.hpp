#pragma once

#include <algorithm>
#include <bit>
#include <cstdint>
#include <cstring>
#include <limits>
#include <memory>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include "compiled.hpp"
#include "geometry.hpp"
#include "linalg.hpp"
#include "rng.hpp"
#include "symmetry.hpp"

namespace diffsym {

// ---- time grids and sampled paths ----

class TimeGrid {
public:
    explicit TimeGrid(std::vector<double> times) : t_(std::move(times)) {
        if (t_.size() < 3)
            throw DimensionMismatch("time grid needs at least two intervals");
        for (std::size_t k = 0; k + 1 < t_.size(); ++k)
            if (!(t_[k] < t_[k + 1]))
                throw DimensionMismatch("time grid must be strictly increasing");
    }

    static TimeGrid uniform(double t0, double t1, std::size_t intervals) {
        if (intervals < 2) throw DimensionMismatch("time grid needs at least two intervals");
        std::vector<double> t(intervals + 1);
        for (std::size_t k = 0; k <= intervals; ++k)
            t[k] = t0 + (t1 - t0) * static_cast<double>(k) / static_cast<double>(intervals);
        return TimeGrid(std::move(t));
    }

    std::size_t intervals() const { return t_.size() - 1; }
    std::size_t size() const { return t_.size(); }
    double at(std::size_t k) const { return t_.at(k); }
    const std::vector<double>& times() const { return t_; }

private:
    std::vector<double> t_;
};

using GridPtr = std::shared_ptr<const TimeGrid>;

// One sampled trajectory. states holds grid.size() rows of dim spatial
// coordinates; the time coordinate lives in the grid.
struct SamplePath {
    GridPtr grid;
    std::size_t dim = 0;
    std::vector<double> states;

    double state(std::size_t k, std::size_t i) const { return states[k * dim + i]; }
};

// A set of paths sharing one grid. data is path-major: path p occupies the
// contiguous block [p*size*dim, (p+1)*size*dim). Together with the scheme tag
// and model this reproduces bit-identically from (seed, grid, n_paths).
class PathEnsemble {
public:
    PathEnsemble(GridPtr grid, std::size_t dim, std::size_t n_paths, std::uint64_t seed,
                 std::string scheme, std::vector<double> data)
        : grid_(std::move(grid)), dim_(dim), n_paths_(n_paths), seed_(seed),
          scheme_(std::move(scheme)), data_(std::move(data)) {
        if (!grid_) throw DimensionMismatch("ensemble needs a grid");
        if (data_.size() != n_paths_ * grid_->size() * dim_)
            throw DimensionMismatch("ensemble data size does not match grid and path count");
    }

    const TimeGrid& grid() const { return *grid_; }
    GridPtr grid_ptr() const { return grid_; }
    std::size_t dim() const { return dim_; }
    std::size_t n_paths() const { return n_paths_; }
    std::uint64_t seed() const { return seed_; }
    const std::string& scheme() const { return scheme_; }
    const std::vector<double>& data() const { return data_; }

    double state(std::size_t p, std::size_t k, std::size_t i) const {
        return data_[(p * grid_->size() + k) * dim_ + i];
    }
    const double* path_data(std::size_t p) const {
        return data_.data() + p * grid_->size() * dim_;
    }

    SamplePath path(std::size_t p) const {
        const double* s = path_data(p);
        return SamplePath{grid_, dim_,
                          std::vector<double>(s, s + grid_->size() * dim_)};
    }

private:
    GridPtr grid_;
    std::size_t dim_, n_paths_;
    std::uint64_t seed_;
    std::string scheme_;
    std::vector<double> data_;
};

// ---- diffusion factorization ----

// sigma with (1/2) sigma sigma^T = A for a numeric spatial matrix A
// (row-major m x m). Eigenvalues of A down to -1e-9 are treated as zero.
inline std::vector<double> factor_diffusion(const std::vector<double>& a, std::size_t m) {
    if (a.size() != m * m) throw DimensionMismatch("diffusion matrix shape mismatch");
    std::vector<double> s(m * m);
    for (std::size_t i = 0; i < m * m; ++i) s[i] = 2.0 * a[i];
    PsdFactor f;
    if (!psd_factor(s, m, f, 2e-9))
        throw NotPSD("diffusion matrix is not positive semidefinite at the requested point",
                     0.5 * jacobi_min_eigenvalue(s, m));
    return f.sigma;
}

// Spatial block of the operator's second-order coefficients, evaluated at a
// full state (t, x^1..x^m).
inline std::vector<double> factor_diffusion(const Diffusor& l, const std::vector<double>& point) {
    const auto& cs = l.coords();
    std::size_t m = cs.dim();
    if (point.size() != cs.size())
        throw DimensionMismatch("evaluation point must list time and every coordinate");
    std::vector<double> a(m * m);
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = i; j < m; ++j) {
            CompiledExpr c(l.a(i + 1, j + 1), cs.names());
            double v = c(point);
            a[i * m + j] = a[j * m + i] = v;
        }
    return factor_diffusion(a, m);
}

// ---- simulation ----

namespace stoch_detail {

// coefficient evaluators for an Euler step of a standard operator
struct CompiledSde {
    std::size_t m = 0;
    std::vector<CompiledExpr> b;       // m spatial drifts
    std::vector<CompiledExpr> a;       // spatial upper triangle, row-major
    bool constant_a = true;

    explicit CompiledSde(const Diffusor& l) {
        const auto& cs = l.coords();
        m = cs.dim();
        for (std::size_t i = 1; i <= m; ++i) b.emplace_back(l.b(i), cs.names());
        for (std::size_t i = 1; i <= m; ++i)
            for (std::size_t j = i; j <= m; ++j) {
                if (!variables(normalize(l.a(i, j))).empty()) constant_a = false;
                a.emplace_back(l.a(i, j), cs.names());
            }
    }

    void eval_a(const double* args, std::vector<double>& out) {
        std::size_t idx = 0;
        for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = i; j < m; ++j) {
                double v = a[idx++](args);
                out[i * m + j] = out[j * m + i] = v;
            }
    }
};

}  // namespace stoch_detail

// Euler-Maruyama paths of the diffusion generated by a standard operator.
// Each path p draws its noise from the substream keyed by (seed, p), so the
// ensemble is a pure function of (operator, x0, grid, n_paths, seed).
inline PathEnsemble simulate(const Diffusor& l, const std::vector<double>& x0,
                             const TimeGrid& grid, std::size_t n_paths, std::uint64_t seed) {
    if (!l.is_standard())
        throw NotStandard("simulation needs unit time drift and no second-order time row");
    const auto& cs = l.coords();
    std::size_t m = cs.dim();
    if (x0.size() != m) throw DimensionMismatch("initial state size does not match coordinates");

    auto gp = std::make_shared<const TimeGrid>(grid);
    std::size_t nt = grid.size();
    std::vector<double> data(n_paths * nt * m);

    stoch_detail::CompiledSde sde(l);
    std::vector<double> args(m + 1), amat(m * m), sigma;
    if (sde.constant_a) {
        args[0] = grid.at(0);
        for (std::size_t i = 0; i < m; ++i) args[i + 1] = x0[i];
        sde.eval_a(args.data(), amat);
        sigma = factor_diffusion(amat, m);
    }

    std::vector<double> xi(m), drift(m);
    for (std::size_t p = 0; p < n_paths; ++p) {
        NormalStream ns(seed, p);
        double* path = data.data() + p * nt * m;
        std::copy(x0.begin(), x0.end(), path);
        for (std::size_t k = 0; k + 1 < nt; ++k) {
            double* cur = path + k * m;
            double* nxt = path + (k + 1) * m;
            double dt = grid.at(k + 1) - grid.at(k);
            double sq = std::sqrt(dt);
            args[0] = grid.at(k);
            std::copy(cur, cur + m, args.begin() + 1);
            for (std::size_t i = 0; i < m; ++i) drift[i] = sde.b[i](args.data());
            if (!sde.constant_a) {
                sde.eval_a(args.data(), amat);
                sigma = factor_diffusion(amat, m);
            }
            ns.fill(k, xi.data(), m);
            for (std::size_t i = 0; i < m; ++i) {
                double v = cur[i] + drift[i] * dt;
                for (std::size_t al = 0; al < m; ++al) v += sigma[i * m + al] * sq * xi[al];
                nxt[i] = v;
            }
        }
    }
    return PathEnsemble(std::move(gp), m, n_paths, seed, "euler-maruyama", std::move(data));
}

// ---- discrete integrals against codiffusors ----

namespace stoch_detail {

// left-point Riemann rule; the time increment enters as both a first-order
// displacement and a factor in second-order products
struct CompiledCodiffusor {
    std::size_t n = 0;  // m + 1
    std::vector<CompiledExpr> first;   // n components
    std::vector<CompiledExpr> second;  // upper triangle, row-major

    explicit CompiledCodiffusor(const Codiffusor& lam) {
        const auto& cs = lam.coords();
        n = cs.size();
        for (std::size_t i = 0; i < n; ++i) first.emplace_back(lam.first(i), cs.names());
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = i; j < n; ++j) second.emplace_back(lam.second(i, j), cs.names());
    }

    // out[0..K] cumulative values along one path slice
    void accumulate(const double* times, const double* states, std::size_t nt, std::size_t m,
                    double* out) {
        std::vector<double> args(n), dx(n);
        out[0] = 0;
        for (std::size_t k = 0; k + 1 < nt; ++k) {
            args[0] = times[k];
            for (std::size_t i = 0; i < m; ++i) args[i + 1] = states[k * m + i];
            dx[0] = times[k + 1] - times[k];
            for (std::size_t i = 0; i < m; ++i) dx[i + 1] = states[(k + 1) * m + i] - states[k * m + i];
            double inc = 0;
            for (std::size_t i = 0; i < n; ++i) inc += first[i](args.data()) * dx[i];
            std::size_t idx = 0;
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t j = i; j < n; ++j) {
                    double c = second[idx++](args.data());
                    inc += (i == j ? 0.5 : 1.0) * c * dx[i] * dx[j];
                }
            out[k + 1] = out[k] + inc;
        }
    }
};

}  // namespace stoch_detail

// Cumulative stochastic integral of a codiffusor along a sampled path,
// one value per grid time, starting at zero.
inline std::vector<double> ito_integral(const Codiffusor& lam, const SamplePath& path) {
    if (lam.coords().dim() != path.dim)
        throw DimensionMismatch("codiffusor and path live on different state spaces");
    if (!path.grid) throw DimensionMismatch("path has no grid");
    stoch_detail::CompiledCodiffusor cc(lam);
    std::vector<double> out(path.grid->size());
    cc.accumulate(path.grid->times().data(), path.states.data(), path.grid->size(), path.dim,
                  out.data());
    return out;
}

// ---- pathwise transformation ----

namespace stoch_detail {

inline PathEnsemble rebuild(const PathEnsemble& e, std::vector<double> new_times,
                            std::vector<double> new_data) {
    for (std::size_t k = 0; k + 1 < new_times.size(); ++k)
        if (!(new_times[k] < new_times[k + 1]))
            throw NonMonotoneTimeChange("transformed time grid is not strictly increasing");
    auto gp = std::make_shared<const TimeGrid>(TimeGrid(std::move(new_times)));
    return PathEnsemble(std::move(gp), e.dim(), e.n_paths(), e.seed(), e.scheme(),
                        std::move(new_data));
}

}  // namespace stoch_detail

// Apply a space-time transformation to every sample: times through the time
// map, states through the spatial maps. The image keeps the transformed grid;
// nothing is resampled.
inline PathEnsemble transform_ensemble(const PathEnsemble& e, const Diffeomorphism& f) {
    const auto& cs = f.source();
    std::size_t m = cs.dim();
    if (m != e.dim())
        throw DimensionMismatch("transformation and ensemble live on different state spaces");
    CompiledExpr time_map(f.f(), cs.names());
    std::vector<CompiledExpr> space;
    for (std::size_t i = 0; i < m; ++i) space.emplace_back(f.phi(i), cs.names());

    std::size_t nt = e.grid().size();
    std::vector<double> args(m + 1, 0.0);
    std::vector<double> new_times(nt);
    for (std::size_t k = 0; k < nt; ++k) {
        args[0] = e.grid().at(k);
        new_times[k] = time_map(args.data());
    }
    std::vector<double> new_data(e.n_paths() * nt * m);
    for (std::size_t p = 0; p < e.n_paths(); ++p)
        for (std::size_t k = 0; k < nt; ++k) {
            args[0] = e.grid().at(k);
            for (std::size_t i = 0; i < m; ++i) args[i + 1] = e.state(p, k, i);
            for (std::size_t i = 0; i < m; ++i)
                new_data[(p * nt + k) * m + i] = space[i](args.data());
        }
    return stoch_detail::rebuild(e, std::move(new_times), std::move(new_data));
}

// Numeric variant: push every sample through a flow map. The flow's time
// component depends only on time, so the image grid stays shared.
inline PathEnsemble transform_ensemble(const PathEnsemble& e, FlowMap f) {
    std::size_t m = e.dim();
    std::size_t nt = e.grid().size();
    std::vector<double> new_times(nt);
    std::vector<double> state(m + 1, 0.0);
    for (std::size_t k = 0; k < nt; ++k) {
        state[0] = e.grid().at(k);
        std::fill(state.begin() + 1, state.end(), 0.0);
        new_times[k] = f(state)[0];
    }
    std::vector<double> new_data(e.n_paths() * nt * m);
    for (std::size_t p = 0; p < e.n_paths(); ++p)
        for (std::size_t k = 0; k < nt; ++k) {
            state[0] = e.grid().at(k);
            for (std::size_t i = 0; i < m; ++i) state[i + 1] = e.state(p, k, i);
            auto img = f(state);
            for (std::size_t i = 0; i < m; ++i) new_data[(p * nt + k) * m + i] = img[i + 1];
        }
    return stoch_detail::rebuild(e, std::move(new_times), std::move(new_data));
}

// ---- martingale z-tests ----

struct MartingaleTestReport {
    struct Entry {
        std::size_t from = 0, to = 0;  // grid indices of the increment window
        std::string weight;
        double z = 0;
    };

    std::string description;
    std::size_t n_paths = 0;
    double z_crit = 4.0;
    double max_abs_z = 0;
    std::vector<Entry> entries;
    bool pass = false;
};

namespace stoch_detail {

inline double z_score(const std::vector<double>& y) {
    std::size_t n = y.size();
    double mean = 0;
    for (double v : y) mean += v;
    mean /= static_cast<double>(n);
    double var = 0;
    for (double v : y) var += (v - mean) * (v - mean);
    var /= static_cast<double>(n - 1);
    double se = std::sqrt(var / static_cast<double>(n));
    if (se < 1e-300) return std::abs(mean) < 1e-300 ? 0.0 : std::numeric_limits<double>::infinity();
    return mean / se;
}

}  // namespace stoch_detail

// Tests whether the compensated process of g is a martingale along the
// ensemble: increments of I(d2g - (Lg) d2t) between consecutive checkpoints,
// weighted by F_{t_j}-measurable factors, should have mean zero. pass holds
// exactly when every weighted z-score stays below z_crit in magnitude.
inline MartingaleTestReport martingale_test(const PathEnsemble& e, const Expr& g,
                                            const Diffusor& l,
                                            std::vector<std::size_t> checkpoints = {},
                                            double z_crit = 4.0) {
    const auto& cs = l.coords();
    std::size_t m = cs.dim();
    if (m != e.dim())
        throw DimensionMismatch("operator and ensemble live on different state spaces");
    std::size_t nmc = e.n_paths();
    if (nmc < 100) throw ConfigError("martingale test needs at least 100 paths");
    std::size_t K = e.grid().intervals();
    if (checkpoints.empty()) checkpoints = {0, K / 4, K / 2, 3 * K / 4, K};
    checkpoints.erase(std::unique(checkpoints.begin(), checkpoints.end()), checkpoints.end());
    if (checkpoints.size() < 2) throw ConfigError("martingale test needs at least two checkpoints");
    for (std::size_t j = 0; j + 1 < checkpoints.size(); ++j)
        if (!(checkpoints[j] < checkpoints[j + 1]))
            throw ConfigError("checkpoints must be strictly increasing");
    if (checkpoints.back() > K) throw ConfigError("checkpoint beyond the last grid index");

    Codiffusor lam = canonical_annihilator_element(g, l);
    stoch_detail::CompiledCodiffusor cc(lam);
    CompiledExpr gval(g, cs.names());

    std::size_t nt = e.grid().size();
    // cumulative integral at the checkpoints, per path
    std::vector<std::vector<double>> mart(nmc);
    std::vector<double> cum(nt);
    for (std::size_t p = 0; p < nmc; ++p) {
        cc.accumulate(e.grid().times().data(), e.path_data(p), nt, m, cum.data());
        mart[p].reserve(checkpoints.size());
        for (std::size_t c : checkpoints) mart[p].push_back(cum[c]);
    }

    MartingaleTestReport rep;
    rep.description = "increments of d2(g) - (Lg) d2t for g = " + to_string(normalize(g));
    rep.n_paths = nmc;
    rep.z_crit = z_crit;

    std::vector<double> y(nmc), args(m + 1);
    for (std::size_t j = 0; j + 1 < checkpoints.size(); ++j) {
        std::size_t ka = checkpoints[j], kb = checkpoints[j + 1];
        // weights are known at the left endpoint of the window
        for (std::size_t w = 0; w < m + 2; ++w) {
            std::string label;
            for (std::size_t p = 0; p < nmc; ++p) {
                double dm = mart[p][j + 1] - mart[p][j];
                double wt;
                if (w == 0) {
                    wt = 1.0;
                    label = "1";
                } else if (w <= m) {
                    wt = e.state(p, ka, w - 1);
                    label = cs.name(w);
                } else {
                    args[0] = e.grid().at(ka);
                    for (std::size_t i = 0; i < m; ++i) args[i + 1] = e.state(p, ka, i);
                    wt = gval(args.data());
                    label = "g";
                }
                y[p] = wt * dm;
            }
            double z = stoch_detail::z_score(y);
            rep.entries.push_back({ka, kb, label, z});
            rep.max_abs_z = std::max(rep.max_abs_z, std::abs(z));
        }
    }
    rep.pass = rep.max_abs_z < z_crit;
    return rep;
}

// ---- end-to-end stochastic verification ----

struct StochasticVerifyConfig {
    std::size_t n_paths = 4000;
    std::size_t grid_intervals = 100;
    double t0 = 0.0;
    double t1 = 1.0;
    std::vector<double> x0;  // defaults to the origin
    std::uint64_t seed = 0x5EED;
    double z_crit = 4.0;
    double flow_parameter = 0.5;  // used when verifying an infinitesimal generator
    int flow_steps = 16;
    std::vector<Expr> test_functions;          // defaults to coordinates, squares, products
    std::vector<std::size_t> checkpoints;      // defaults to grid quartiles
};

struct SymmetryEvidence {
    bool pass = true;
    std::vector<MartingaleTestReport> reports;
};

namespace stoch_detail {

inline std::vector<Expr> default_test_functions(const CoordinateSystem& cs) {
    std::vector<Expr> g;
    std::size_t m = cs.dim();
    for (std::size_t i = 1; i <= m; ++i) g.push_back(variable(cs.name(i)));
    for (std::size_t i = 1; i <= m; ++i)
        g.push_back(variable(cs.name(i)) * variable(cs.name(i)));
    for (std::size_t i = 1; i <= m; ++i)
        for (std::size_t j = i + 1; j <= m; ++j)
            g.push_back(variable(cs.name(i)) * variable(cs.name(j)));
    return g;
}

inline SymmetryEvidence run_martingale_battery(const PathEnsemble& transformed, const Diffusor& l,
                                               const StochasticVerifyConfig& cfg) {
    std::vector<Expr> gs =
        cfg.test_functions.empty() ? default_test_functions(l.coords()) : cfg.test_functions;
    SymmetryEvidence ev;
    for (const auto& g : gs) {
        ev.reports.push_back(martingale_test(transformed, g, l, cfg.checkpoints, cfg.z_crit));
        if (!ev.reports.back().pass) ev.pass = false;
    }
    return ev;
}

inline PathEnsemble simulate_for_verify(const Diffusor& l, const StochasticVerifyConfig& cfg) {
    std::vector<double> x0 = cfg.x0;
    if (x0.empty()) x0.assign(l.coords().dim(), 0.0);
    TimeGrid grid = TimeGrid::uniform(cfg.t0, cfg.t1, cfg.grid_intervals);
    return simulate(l, x0, grid, cfg.n_paths, cfg.seed);
}

}  // namespace stoch_detail

// Simulate the diffusion, push the samples through the finite transformation,
// and test that every compensated test function is still a martingale.
inline SymmetryEvidence verify_symmetry_stochastically(const Diffeomorphism& f, const Diffusor& l,
                                                       const StochasticVerifyConfig& cfg = {}) {
    PathEnsemble e = stoch_detail::simulate_for_verify(l, cfg);
    PathEnsemble te = transform_ensemble(e, f);
    return stoch_detail::run_martingale_battery(te, l, cfg);
}

// Infinitesimal variant: the candidate generator is exponentiated numerically
// before the samples are pushed through it.
inline SymmetryEvidence verify_symmetry_stochastically(const ProjectableVectorField& x,
                                                       const Diffusor& l,
                                                       const StochasticVerifyConfig& cfg = {}) {
    detail::require_same(x.coords(), l.coords());
    PathEnsemble e = stoch_detail::simulate_for_verify(l, cfg);
    PathEnsemble te = transform_ensemble(e, FlowMap(x, cfg.flow_parameter, cfg.flow_steps));
    return stoch_detail::run_martingale_battery(te, l, cfg);
}

// ---- export ----

inline void export_csv(const PathEnsemble& e, std::ostream& os) {
    os << "t,path";
    for (std::size_t i = 1; i <= e.dim(); ++i) os << ",x" << i;
    os << "\n";
    os.precision(17);
    for (std::size_t p = 0; p < e.n_paths(); ++p)
        for (std::size_t k = 0; k < e.grid().size(); ++k) {
            os << e.grid().at(k) << "," << p;
            for (std::size_t i = 0; i < e.dim(); ++i) os << "," << e.state(p, k, i);
            os << "\n";
        }
}

// Layout after the 8-byte magic, all little-endian: u64 n_paths, u64 n_times,
// u64 dim, u64 seed, u32 scheme length, scheme bytes, f64 times, f64 states
// path-major.
inline void export_binary(const PathEnsemble& e, std::ostream& os) {
    static_assert(std::endian::native == std::endian::little,
                  "binary export assumes a little-endian host");
    const char magic[8] = {'D', 'S', 'Y', 'M', 'E', 'N', 'S', '1'};
    os.write(magic, 8);
    auto put64 = [&](std::uint64_t v) { os.write(reinterpret_cast<const char*>(&v), 8); };
    put64(e.n_paths());
    put64(e.grid().size());
    put64(e.dim());
    put64(e.seed());
    std::uint32_t slen = static_cast<std::uint32_t>(e.scheme().size());
    os.write(reinterpret_cast<const char*>(&slen), 4);
    os.write(e.scheme().data(), static_cast<std::streamsize>(slen));
    os.write(reinterpret_cast<const char*>(e.grid().times().data()),
             static_cast<std::streamsize>(8 * e.grid().size()));
    os.write(reinterpret_cast<const char*>(e.data().data()),
             static_cast<std::streamsize>(8 * e.data().size()));
}

}  // namespace diffsym
