#include "twostage/fit.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <iomanip>
#include <numeric>
#include <sstream>

#include "twostage/numeric.hpp"

namespace twostage {

namespace {

// Counts pairs i < j with v[i] > v[j] while sorting v ascending.
std::uint64_t count_inversions(std::vector<double>& v) {
    std::vector<double> buf(v.size());
    std::uint64_t swaps = 0;
    for (std::size_t width = 1; width < v.size(); width *= 2) {
        for (std::size_t lo = 0; lo < v.size(); lo += 2 * width) {
            const std::size_t mid = std::min(lo + width, v.size());
            const std::size_t hi = std::min(lo + 2 * width, v.size());
            std::size_t i = lo, j = mid, k = lo;
            while (i < mid && j < hi) {
                if (v[j] < v[i]) {
                    swaps += mid - i;
                    buf[k++] = v[j++];
                } else {
                    buf[k++] = v[i++];
                }
            }
            while (i < mid) buf[k++] = v[i++];
            while (j < hi) buf[k++] = v[j++];
        }
        v.swap(buf);
    }
    return swaps;
}

// Sum over runs of equal adjacent elements of t(t-1)/2.
template <class Eq>
std::uint64_t tied_pairs(std::size_t n, Eq eq) {
    std::uint64_t total = 0, run = 1;
    for (std::size_t i = 1; i <= n; ++i) {
        if (i < n && eq(i - 1, i)) {
            ++run;
        } else {
            total += run * (run - 1) / 2;
            run = 1;
        }
    }
    return total;
}

double finite_or(double x, double fallback) { return std::isfinite(x) ? x : fallback; }

}  // namespace

double empirical_kendall_tau(const PseudoObservations& obs) {
    const std::size_t n = obs.size();
    if (obs.v.size() != n) throw std::invalid_argument("kendall tau: length mismatch");
    if (n < 2) throw std::invalid_argument("kendall tau: need n >= 2");
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
        return obs.u[a] < obs.u[b] || (obs.u[a] == obs.u[b] && obs.v[a] < obs.v[b]);
    });
    std::vector<double> u(n), v(n);
    for (std::size_t i = 0; i < n; ++i) {
        u[i] = obs.u[idx[i]];
        v[i] = obs.v[idx[i]];
    }
    const std::uint64_t tie_u = tied_pairs(n, [&](std::size_t a, std::size_t b) { return u[a] == u[b]; });
    const std::uint64_t tie_uv =
        tied_pairs(n, [&](std::size_t a, std::size_t b) { return u[a] == u[b] && v[a] == v[b]; });
    const std::uint64_t discordant = count_inversions(v);
    const std::uint64_t tie_v = tied_pairs(n, [&](std::size_t a, std::size_t b) { return v[a] == v[b]; });
    const std::uint64_t total = static_cast<std::uint64_t>(n) * (n - 1) / 2;
    // concordant - discordant = total - tie_u - tie_v + tie_uv - 2 discordant
    const double num = static_cast<double>(total + tie_uv) - static_cast<double>(tie_u + tie_v) -
                       2.0 * static_cast<double>(discordant);
    return num / static_cast<double>(total);
}

double copula_loglik(const CopulaModel& m, const PseudoObservations& obs) {
    if (m.family() == Family::Independence) return 0.0;
    numeric::KahanSum acc;
    for (std::size_t i = 0; i < obs.size(); ++i) acc.add(log_density(m, obs.u[i], obs.v[i]));
    return acc.value();
}

FitResult fit_mle(Family family, Rotation rotation, const PseudoObservations& obs) {
    const std::size_t n = obs.size();
    if (n < 10) throw FitError("copula fit needs at least 10 observations, got " + std::to_string(n));
    try {
        validate(obs);
    } catch (const std::exception& e) {
        throw FitError(std::string("copula fit: ") + e.what());
    }
    if (rotation != Rotation::None && !is_rotatable(family))
        throw FitError(to_string(family) + " copula does not take a rotation");

    FitResult r;
    r.n = n;
    if (family == Family::Independence) {
        r.model = CopulaModel::independence();
        r.loglik = 0.0;
        r.k = 0;
        r.converged = true;
    } else {
        double lo = 0.0, hi = 0.0;
        std::function<double(double)> negll;
        constexpr double kPenalty = 1e300;
        if (family == Family::Gaussian) {
            // The Gaussian log-likelihood only depends on two sums of normal scores.
            numeric::KahanSum sq, cross;
            for (std::size_t i = 0; i < n; ++i) {
                const double x = numeric::normal_quantile(obs.u[i]);
                const double y = numeric::normal_quantile(obs.v[i]);
                sq.add(x * x + y * y);
                cross.add(x * y);
            }
            const double sxx = sq.value(), sxy = cross.value();
            const double dn = static_cast<double>(n);
            negll = [=](double rho) {
                const double one = 1.0 - rho * rho;
                return 0.5 * dn * std::log(one) + (rho * rho * sxx - 2.0 * rho * sxy) / (2.0 * one);
            };
            lo = -0.9999;
            hi = 0.9999;
        } else {
            switch (family) {
                case Family::Clayton:
                    lo = 1e-4;
                    hi = 50.0;
                    break;
                case Family::Gumbel:
                case Family::Joe:
                    lo = 1.0 + 1e-6;
                    hi = 50.0;
                    break;
                case Family::Frank:
                    if (empirical_kendall_tau(obs) < 0.0) {
                        lo = -50.0;
                        hi = -1e-6;
                    } else {
                        lo = 1e-6;
                        hi = 50.0;
                    }
                    break;
                default:
                    break;
            }
            negll = [&obs, family, rotation](double th) {
                return finite_or(-copula_loglik(CopulaModel(family, rotation, th), obs), kPenalty);
            };
        }
        const auto opt = numeric::brent_minimize(negll, lo, hi, 1e-10);
        if (!opt.converged) throw FitError("copula fit for " + to_string(family) + " did not converge");
        r.model = CopulaModel(family, rotation, opt.x);
        r.loglik = copula_loglik(r.model, obs);
        if (!std::isfinite(r.loglik)) throw FitError("copula fit for " + to_string(family) + ": non-finite likelihood");
        r.k = 1;
        r.converged = true;
    }
    r.aic = -2.0 * r.loglik + 2.0 * r.k;
    r.bic = -2.0 * r.loglik + r.k * std::log(static_cast<double>(n));
    return r;
}

const FitResult& SelectionReport::bic_winner() const {
    if (!best_bic) throw FitError("copula selection: no candidate could be fitted");
    return *candidates[*best_bic].fit;
}

nlohmann::json SelectionReport::to_json() const {
    nlohmann::json cands = nlohmann::json::array();
    for (const auto& c : candidates) {
        nlohmann::json j = {{"family", to_string(c.family)}, {"rotation", to_string(c.rotation)}};
        if (c.fit) {
            j["theta"] = c.fit->model.theta();
            j["kendall_tau"] = c.fit->model.kendall_tau();
            j["loglik"] = c.fit->loglik;
            j["aic"] = c.fit->aic;
            j["bic"] = c.fit->bic;
            j["n"] = c.fit->n;
            j["k"] = c.fit->k;
            j["converged"] = c.fit->converged;
        } else {
            j["error"] = c.error;
        }
        cands.push_back(std::move(j));
    }
    auto winner = [&](const std::optional<std::size_t>& w) -> nlohmann::json {
        if (!w) return nullptr;
        return to_string(candidates[*w].family);
    };
    return {{"sample_kendall_tau", sample_tau},
            {"candidates", cands},
            {"winner", {{"loglik", winner(best_loglik)}, {"aic", winner(best_aic)}, {"bic", winner(best_bic)}}}};
}

std::string SelectionReport::to_text() const {
    std::ostringstream out;
    out << std::left << std::setw(22) << "Family" << std::right << std::setw(14) << "LogLik" << std::setw(14) << "AIC"
        << std::setw(14) << "BIC" << '\n';
    out << std::fixed << std::setprecision(3);
    for (std::size_t i = 0; i < candidates.size(); ++i) {
        const auto& c = candidates[i];
        std::string name = to_string(c.family);
        if (c.rotation != Rotation::None) name += " (" + to_string(c.rotation) + ")";
        out << std::left << std::setw(22) << name << std::right;
        if (c.fit) {
            out << std::setw(14) << c.fit->loglik << std::setw(14) << c.fit->aic << std::setw(14) << c.fit->bic;
        } else {
            out << "  fit failed: " << c.error;
        }
        out << '\n';
    }
    if (best_bic) out << "selected by BIC: " << to_string(candidates[*best_bic].family) << '\n';
    return out.str();
}

PseudoObservations pvalue_pairs(const HypothesisTable& table, double p2_above) {
    if (!(p2_above >= 0.0 && p2_above < 1.0)) throw std::invalid_argument("pvalue_pairs: p2_above must lie in [0, 1)");
    PseudoObservations obs;
    obs.u.reserve(table.size());
    obs.v.reserve(table.size());
    for (const auto& h : table.rows) {
        if (p2_above > 0.0 && !(h.p2 > p2_above)) continue;
        obs.u.push_back(h.p1);
        obs.v.push_back(std::clamp(h.p2, kBoundaryEps, 1.0 - kBoundaryEps));
    }
    return obs;
}

std::vector<Family> default_candidate_families() {
    return {Family::Gaussian, Family::Frank, Family::Clayton, Family::Gumbel, Family::Joe};
}

SelectionReport select_copula(const PseudoObservations& obs, const std::vector<Family>& families) {
    if (families.empty()) throw std::invalid_argument("copula selection: no candidate families");
    SelectionReport rep;
    rep.sample_tau = empirical_kendall_tau(obs);
    for (Family f : families) {
        Candidate c;
        c.family = f;
        c.rotation = rotation_for_sign(f, rep.sample_tau);
        try {
            c.fit = fit_mle(f, c.rotation, obs);
        } catch (const std::exception& e) {
            c.error = e.what();
        }
        rep.candidates.push_back(std::move(c));
    }
    for (std::size_t i = 0; i < rep.candidates.size(); ++i) {
        const auto& fit = rep.candidates[i].fit;
        if (!fit) continue;
        if (!rep.best_loglik || fit->loglik > rep.candidates[*rep.best_loglik].fit->loglik) rep.best_loglik = i;
        if (!rep.best_aic || fit->aic < rep.candidates[*rep.best_aic].fit->aic) rep.best_aic = i;
        if (!rep.best_bic || fit->bic < rep.candidates[*rep.best_bic].fit->bic) rep.best_bic = i;
    }
    return rep;
}

}  // namespace twostage
