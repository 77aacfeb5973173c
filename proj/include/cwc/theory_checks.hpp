#pragma once

// Empirical checks of the spectral and propagation estimates on discrete media.
//
// Every case records measured value, bound and margin (>= 1 means the
// inequality holds with the declared slack). Cases whose hypothesis fails are
// reported as "hypothesis-failed" and never count as violations; cases with
// no stated estimate (periodic gaps) are "informational".

#include <cwc/eigensolver.hpp>
#include <cwc/grid_medium.hpp>
#include <cwc/operators.hpp>
#include <cwc/propagation.hpp>
#include <cwc/rng.hpp>
#include <cwc/types.hpp>

#include <nlohmann/json.hpp>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <ostream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

namespace cwc {

inline constexpr double norm_slack = 2.0; // discrete vs continuous gaps and sup norms
inline constexpr double c_sigma_slack = 8.0;

enum class CaseStatus { pass, violation, hypothesis_failed, informational };

inline std::string_view to_string(CaseStatus s) {
	switch (s) {
	case CaseStatus::pass: return "pass";
	case CaseStatus::violation: return "violation";
	case CaseStatus::hypothesis_failed: return "hypothesis-failed";
	case CaseStatus::informational: return "informational";
	}
	return "?";
}

struct CaseDetail {
	std::string label;
	std::uint64_t seed = 0;
	CaseStatus status = CaseStatus::pass;
	double measured = 0.0;
	double bound = 0.0;
	double margin = std::numeric_limits<double>::infinity();
	nlohmann::json extra = nlohmann::json::object();
};

struct CheckReport {
	std::string name;
	std::size_t n_cases = 0;
	std::size_t n_violations = 0;
	std::size_t n_skipped = 0; // hypothesis-failed or informational
	double worst_margin = std::numeric_limits<double>::infinity();
	nlohmann::json header = nlohmann::json::object();
	std::vector<CaseDetail> cases;

	bool passed() const { return n_violations == 0; }

	void add(CaseDetail c) {
		++n_cases;
		if (c.status == CaseStatus::violation)
			++n_violations;
		if (c.status == CaseStatus::pass || c.status == CaseStatus::violation)
			worst_margin = std::min(worst_margin, c.margin);
		else
			++n_skipped;
		cases.push_back(std::move(c));
	}

	std::string summary() const {
		std::ostringstream s;
		s << name << ": " << n_cases << " cases, " << n_violations << " violations, " << n_skipped
		  << " skipped, worst margin " << worst_margin;
		return s.str();
	}
};

namespace detail {

inline nlohmann::json finite_or_null(double x) { return std::isfinite(x) ? nlohmann::json(x) : nlohmann::json(); }

inline CaseStatus judge(double margin) { return margin >= 1.0 ? CaseStatus::pass : CaseStatus::violation; }

/// fn(i) for i in [0, count) over a few threads; results land in slot i.
template <class T, class F>
std::vector<T> parallel_map(std::size_t count, F fn) {
	std::vector<T> out(count);
	std::atomic<std::size_t> next{0};
	const std::size_t workers = std::min<std::size_t>(count, std::max(1u, std::thread::hardware_concurrency()));
	std::vector<std::exception_ptr> errors(workers);
	{
		std::vector<std::jthread> pool;
		for (std::size_t w = 0; w < workers; ++w)
			pool.emplace_back([&, w] {
				try {
					for (std::size_t i; (i = next.fetch_add(1)) < count;)
						out[i] = fn(i);
				} catch (...) {
					errors[w] = std::current_exception();
				}
			});
	}
	for (auto& e : errors)
		if (e)
			std::rethrow_exception(e);
	return out;
}

} // namespace detail

/// One line per case, preceded by a header line with the totals.
inline void write_json_lines(std::ostream& out, const CheckReport& r) {
	nlohmann::json head = r.header;
	head["check"] = r.name;
	head["n_cases"] = r.n_cases;
	head["n_violations"] = r.n_violations;
	head["n_skipped"] = r.n_skipped;
	head["worst_margin"] = detail::finite_or_null(r.worst_margin);
	out << head.dump() << '\n';
	for (const auto& c : r.cases) {
		nlohmann::json j{{"check", r.name},
		                 {"case", c.label},
		                 {"seed", c.seed},
		                 {"status", to_string(c.status)},
		                 {"measured", detail::finite_or_null(c.measured)},
		                 {"bound", detail::finite_or_null(c.bound)},
		                 {"margin", detail::finite_or_null(c.margin)}};
		if (!c.extra.empty())
			j["detail"] = c.extra;
		out << j.dump() << '\n';
	}
}

// ---------------------------------------------------------------------------
// Media and data suites.

struct SuiteMedium {
	Medium medium;
	std::uint64_t seed = 0;
	std::string label;
};

/// count piecewise-constant media with Var(log sigma) in [var_budget/2, var_budget].
inline std::vector<SuiteMedium> random_media_suite(std::size_t count, double var_budget, std::size_t n, Boundary bc,
                                                   std::uint64_t seed) {
	std::vector<SuiteMedium> out;
	const Grid grid(n, bc);
	for (std::size_t i = 0; i < count; ++i) {
		const auto s = derive_seed(seed, "theory-media", i);
		auto rng = make_rng(s, "jumps");
		const int jumps = 1 + static_cast<int>(uniform_index(rng, 12));
		out.push_back({make_random_bv_medium(var_budget, jumps, grid, s), s, "bv-" + std::to_string(i)});
	}
	return out;
}

struct SuiteData {
	InitialData data;
	std::uint64_t seed = 0;
};

/// Gaussian bumps at random centers and widths; every other one also carries
/// a bump of initial velocity.
inline std::vector<SuiteData> random_bump_suite(const Grid& grid, std::size_t count, std::uint64_t seed) {
	std::vector<SuiteData> out;
	const double h = grid.spacing();
	for (std::size_t i = 0; i < count; ++i) {
		const auto s = derive_seed(seed, "theory-bumps", i);
		auto rng = make_rng(s, "bump");
		const double std = uniform(rng, 4.0, 16.0) * h;
		InitialData d;
		d.u0 = gaussian_bump(grid, uniform(rng, 0.2, 0.8), std);
		d.u1 = Vector::Zero(d.u0.size());
		if (i % 2 == 1)
			d.u1 = uniform(rng, 1.0, 10.0) * gaussian_bump(grid, uniform(rng, 0.2, 0.8), std);
		out.push_back({std::move(d), s});
	}
	return out;
}

namespace detail {

/// Distinct eigenvalues (ascending) and, for each, the largest sup norm
/// sqrt(N) max_j |sigma v| over its eigenvectors. With a refined spectrum,
/// faithful[j] says whether mode j reproduces the 2n grid within a factor
/// of norm_slack in sup norm and in the gap to mode j+1.
struct Spectrum {
	std::vector<double> omega;
	std::vector<double> sup;
	std::vector<char> sup_faithful;
	std::vector<char> gap_faithful;
};

inline Spectrum distinct_spectrum(const Medium& medium, bool compare_refined = false) {
	const WaveOperator op(medium);
	const auto cl = clusters(op, full_decomposition(op), medium.size());
	Spectrum s;
	for (const auto& c : cl) {
		s.omega.push_back(c.omega);
		s.sup.push_back(c.sup);
	}
	s.sup_faithful.assign(cl.size(), 1);
	s.gap_faithful.assign(cl.size(), 1);
	if (compare_refined) {
		const WaveOperator fine_op(refine(medium));
		const auto fine = clusters(fine_op, full_decomposition(fine_op), cl.size() + 1);
		for (std::size_t j = 0; j < cl.size(); ++j) {
			s.sup_faithful[j] = j < fine.size() && factor(cl[j].sup, fine[j].sup) <= norm_slack;
			s.gap_faithful[j] = j + 1 < cl.size() && j + 1 < fine.size() &&
			                    factor(cl[j + 1].omega - cl[j].omega, fine[j + 1].omega - fine[j].omega) <= norm_slack;
		}
	}
	return s;
}

inline std::size_t mode_count(std::size_t total, double fraction) {
	return std::clamp<std::size_t>(static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(total))), 2,
	                               total);
}

} // namespace detail

// ---------------------------------------------------------------------------
// Spectral gaps.

/// (pi - Var)/int sigma <= gap <= (pi + Var)/int sigma, each side relaxed by
/// norm_slack, on the lowest modes_fraction of the distinct spectrum. Gaps
/// that move by more than norm_slack on the 2n grid are skipped.
inline CheckReport check_gap_bounds(const std::vector<SuiteMedium>& suite, double modes_fraction = 0.5) {
	require(modes_fraction > 0.0 && modes_fraction <= 1.0, "gap check: modes_fraction must lie in (0,1]");
	CheckReport rep;
	rep.name = "gap-bounds";
	rep.header = {{"slack", norm_slack}, {"modes_fraction", modes_fraction}};
	auto cases = detail::parallel_map<CaseDetail>(suite.size(), [&](std::size_t i) {
		const auto& sm = suite[i];
		const Medium& m = sm.medium;
		const double var = m.var_log_sigma();
		CaseDetail c;
		c.label = sm.label;
		c.seed = sm.seed;
		c.extra = {{"var_log_sigma", var}, {"bc", to_string(m.grid().bc())}, {"n", m.grid().n()}};
		if (!m.grid().periodic() && var >= pi) {
			c.status = CaseStatus::hypothesis_failed;
			return c;
		}
		const auto sp = detail::distinct_spectrum(m, true);
		const std::size_t modes = detail::mode_count(sp.omega.size(), modes_fraction);
		double gmin = std::numeric_limits<double>::infinity(), gmax = 0.0;
		std::size_t unfaithful = 0;
		for (std::size_t j = 0; j + 1 < modes; ++j) {
			if (!sp.gap_faithful[j]) {
				++unfaithful;
				continue;
			}
			const double g = sp.omega[j + 1] - sp.omega[j];
			gmin = std::min(gmin, g);
			gmax = std::max(gmax, g);
		}
		const double travel = m.crossing_time();
		const double lower = (pi - var) / travel / norm_slack;
		const double upper = norm_slack * (pi + var) / travel;
		c.extra["modes"] = modes;
		c.extra["unfaithful_gaps"] = unfaithful;
		c.extra["min_gap"] = gmin;
		c.extra["max_gap"] = gmax;
		c.extra["lower"] = lower;
		c.extra["upper"] = upper;
		c.measured = gmin;
		c.bound = lower;
		// The lower bound goes vacuous for Var >= pi in the periodic case too.
		c.margin = std::min(lower > 0.0 ? gmin / lower : std::numeric_limits<double>::infinity(), upper / gmax);
		c.status = m.grid().periodic() ? CaseStatus::informational : detail::judge(c.margin);
		return c;
	});
	for (auto& c : cases)
		rep.add(std::move(c));
	return rep;
}

// ---------------------------------------------------------------------------
// Incoherence.

/// sqrt(N) max_j |sigma v| <= norm_slack sqrt(2) exp(Var) for every
/// eigenvector normalized by (1/N) sum sigma^2 v^2 = 1. Modes the grid does
/// not resolve (sup norm off by more than norm_slack from the 2n grid) are
/// counted but not judged.
inline CheckReport check_incoherence(const std::vector<SuiteMedium>& suite) {
	CheckReport rep;
	rep.name = "incoherence";
	rep.header = {{"slack", norm_slack}};
	auto cases = detail::parallel_map<CaseDetail>(suite.size(), [&](std::size_t i) {
		const auto& sm = suite[i];
		const Medium& m = sm.medium;
		const double var = m.var_log_sigma();
		const auto sp = detail::distinct_spectrum(m, true);
		std::size_t worst = 0, unfaithful = 0;
		for (std::size_t j = 0; j < sp.sup.size(); ++j) {
			if (!sp.sup_faithful[j])
				++unfaithful;
			else if (sp.sup[j] > sp.sup[worst] || !sp.sup_faithful[worst])
				worst = j;
		}
		CaseDetail c;
		c.label = sm.label;
		c.seed = sm.seed;
		c.measured = sp.sup[worst];
		c.bound = norm_slack * std::sqrt(2.0) * std::exp(var);
		c.margin = c.bound / c.measured;
		c.extra = {{"var_log_sigma", var},
		           {"bc", to_string(m.grid().bc())},
		           {"n", m.grid().n()},
		           {"eigenvalues", sp.omega.size()},
		           {"unfaithful_modes", unfaithful},
		           {"worst_mode", worst}};
		// Stated for Dirichlet and Neumann ends; periodic modes are reported only.
		c.status = m.grid().periodic() ? CaseStatus::informational : detail::judge(c.margin);
		return c;
	});
	for (auto& c : cases)
		rep.add(std::move(c));
	return rep;
}

// ---------------------------------------------------------------------------
// l1 growth.

inline double l1_growth_factor(const Medium& m) {
	const double var = m.var_log_sigma();
	return m.grid().periodic() ? 1.0 / (1.0 - 0.5 * var) : 1.0 / (1.0 - var);
}

inline bool l1_growth_hypothesis(const Medium& m) {
	return m.var_log_sigma() < (m.grid().periodic() ? 2.0 : 1.0);
}

/// h sum w sigma |u(t)| <= 2 sqrt(smax/smin) D^c (h sum w sigma |u0| + h sum w sigma^2 |U1|)
/// at n_times times spread over (0, crossings t#], with t# = 1/sigma_min and
/// c the number of started t# intervals. One case per (medium, data) pair.
inline CheckReport check_l1_growth(const std::vector<SuiteMedium>& suite, std::size_t bumps_per_medium,
                                   std::uint64_t seed, int crossings = 3, int n_times = 30) {
	require(crossings >= 1 && n_times >= 1, "l1 growth: need at least one crossing and one time");
	CheckReport rep;
	rep.name = "l1-growth";
	rep.header = {{"crossings", crossings}, {"times", n_times}, {"bumps_per_medium", bumps_per_medium}};
	auto per_medium = detail::parallel_map<std::vector<CaseDetail>>(suite.size(), [&](std::size_t i) {
		const auto& sm = suite[i];
		const Medium& m = sm.medium;
		const Grid& g = m.grid();
		const double var = m.var_log_sigma();
		const auto data = random_bump_suite(g, bumps_per_medium, derive_seed(seed, "l1-data", i));
		std::vector<CaseDetail> out;
		if (!l1_growth_hypothesis(m)) {
			for (std::size_t b = 0; b < data.size(); ++b) {
				CaseDetail c;
				c.label = sm.label + "/bump-" + std::to_string(b);
				c.seed = data[b].seed;
				c.status = CaseStatus::hypothesis_failed;
				c.extra = {{"var_log_sigma", var}, {"medium_seed", sm.seed}};
				out.push_back(std::move(c));
			}
			return out;
		}
		const ReferencePropagator ref(m);
		const Vector hw = g.spacing() * g.quadrature_weights();
		auto norm1 = [&](const Vector& f) { return hw.cwiseProduct(f).lpNorm<1>(); };
		const double D = l1_growth_factor(m);
		const double t_sharp = 1.0 / m.sigma_min();
		const double pre = 2.0 * std::sqrt(m.contrast());
		std::vector<double> times;
		for (int s = 1; s <= n_times; ++s)
			times.push_back(crossings * t_sharp * s / n_times);
		for (std::size_t b = 0; b < data.size(); ++b) {
			const auto& d = data[b].data;
			const Vector U1 = cumulative_integral(g, d.u1);
			const double initial = norm1(m.sigma().cwiseProduct(d.u0)) +
			                       norm1(m.sigma().cwiseProduct(m.sigma()).cwiseProduct(U1));
			const Matrix U = ref.fields(d, times);
			CaseDetail c;
			c.label = sm.label + "/bump-" + std::to_string(b);
			c.seed = data[b].seed;
			double worst_t = 0.0;
			for (std::size_t s = 0; s < times.size(); ++s) {
				const double count = std::ceil(times[s] / t_sharp - 1e-12);
				const double bound = pre * std::pow(D, count) * initial;
				const double measured = norm1(m.sigma().cwiseProduct(U.col(static_cast<Eigen::Index>(s))));
				if (bound / measured < c.margin) {
					c.margin = bound / measured;
					c.measured = measured;
					c.bound = bound;
					worst_t = times[s];
				}
			}
			c.status = detail::judge(c.margin);
			c.extra = {{"var_log_sigma", var}, {"medium_seed", sm.seed}, {"D", D}, {"worst_time", worst_t}};
			out.push_back(std::move(c));
		}
		return out;
	});
	for (auto& cases : per_medium)
		for (auto& c : cases)
			rep.add(std::move(c));
	return rep;
}

// ---------------------------------------------------------------------------
// Sampling without replacement.

/// Draws k distinct indices one at a time, each from p restricted to the
/// indices not drawn yet and renormalized.
inline std::vector<std::size_t> sequential_draw(const std::vector<double>& p, std::size_t k, Rng& rng) {
	std::vector<char> taken(p.size(), 0);
	std::vector<std::size_t> out;
	double remaining = 1.0;
	for (std::size_t s = 0; s < k; ++s) {
		double u = uniform01(rng) * remaining;
		std::size_t pick = p.size();
		for (std::size_t i = 0; i < p.size(); ++i) {
			if (taken[i])
				continue;
			pick = i;
			if (u < p[i])
				break;
			u -= p[i];
		}
		taken[pick] = 1;
		remaining -= p[pick];
		// Recompute occasionally so rounding in the running total cannot drift.
		if (s % 16 == 15) {
			remaining = 0.0;
			for (std::size_t i = 0; i < p.size(); ++i)
				if (!taken[i])
					remaining += p[i];
		}
		out.push_back(pick);
	}
	return out;
}

/// Empirical inclusion probability of each index against k/N (uniform p) or
/// the floor k min(p), within 3 binomial standard deviations.
inline CheckReport check_sampling_proposition(const std::vector<double>& p, std::size_t k, std::size_t trials,
                                              std::uint64_t seed) {
	require(!p.empty(), "sampling check: empty probability vector");
	double total = 0.0;
	for (double x : p) {
		require(std::isfinite(x) && x > 0.0, "sampling check: probabilities must be positive");
		total += x;
	}
	require(std::abs(total - 1.0) <= 1e-9, "sampling check: probabilities must sum to 1");
	require(k >= 1 && k <= p.size(), "sampling check: need 1 <= k <= N");
	require(trials >= 1, "sampling check: need at least one trial");

	const std::size_t N = p.size();
	const double pmin = *std::min_element(p.begin(), p.end());
	const double pmax = *std::max_element(p.begin(), p.end());
	const bool uniform_case = pmax - pmin <= 1e-12;

	auto rng = make_rng(seed, "sampling-proposition");
	std::vector<std::size_t> hits(N, 0);
	for (std::size_t t = 0; t < trials; ++t)
		for (auto i : sequential_draw(p, k, rng))
			++hits[i];

	CheckReport rep;
	rep.name = "sampling-proposition";
	rep.header = {{"N", N}, {"k", k}, {"trials", trials}, {"seed", seed}, {"uniform", uniform_case}};
	const double target = uniform_case ? static_cast<double>(k) / static_cast<double>(N)
	                                   : std::min(1.0, static_cast<double>(k) * pmin);
	for (std::size_t i = 0; i < N; ++i) {
		const double q = static_cast<double>(hits[i]) / static_cast<double>(trials);
		// Standard deviation of the mean at the target rate; a floor of one
		// count keeps degenerate targets (0 or 1) meaningful.
		const double sd = std::max(std::sqrt(target * (1.0 - target) / static_cast<double>(trials)),
		                           1.0 / static_cast<double>(trials));
		const double dev = uniform_case ? std::abs(q - target) : std::max(0.0, target - q);
		CaseDetail c;
		c.label = "index-" + std::to_string(i);
		c.seed = seed;
		c.measured = q;
		c.bound = target;
		c.margin = dev == 0.0 ? std::numeric_limits<double>::infinity() : 3.0 * sd / dev;
		c.status = detail::judge(c.margin);
		c.extra = {{"p", p[i]}, {"sigmas", dev / sd}};
		rep.add(std::move(c));
	}
	return rep;
}

// ---------------------------------------------------------------------------
// Recovery constant.

struct CSigmaEstimate {
	double probability_ratio = 0.0; // p_unif / min p_n
	double mu_squared = 0.0;        // largest squared sup norm
	double measured = 0.0;          // product of the two
	double analytic = 0.0;          // (pi+Var)/(pi-Var) exp(2 Var)
	double bound = 0.0;             // analytic times c_sigma_slack
	std::size_t modes = 0;
	bool hypothesis = true;
};

/// Uniform shifts pick an eigenvalue with probability proportional to its
/// cell (half the gap to each neighbour, the end cells mirrored). Restricted
/// to the lowest modes_fraction of the distinct spectrum.
inline CSigmaEstimate estimate_c_sigma(const Medium& m, double modes_fraction = 0.5) {
	require(modes_fraction > 0.0 && modes_fraction <= 1.0, "C(sigma): modes_fraction must lie in (0,1]");
	CSigmaEstimate e;
	const double var = m.var_log_sigma();
	e.hypothesis = var < pi;
	if (e.hypothesis) {
		e.analytic = (pi + var) / (pi - var) * std::exp(2.0 * var);
		e.bound = c_sigma_slack * e.analytic;
	}
	const auto sp = detail::distinct_spectrum(m);
	const std::size_t K = detail::mode_count(sp.omega.size(), modes_fraction);
	e.modes = K;
	std::vector<double> cell(K);
	for (std::size_t j = 0; j < K; ++j) {
		const double left = j > 0 ? sp.omega[j] - sp.omega[j - 1] : sp.omega[1] - sp.omega[0];
		const double right = j + 1 < K ? sp.omega[j + 1] - sp.omega[j] : left;
		cell[j] = 0.5 * (left + right);
		e.mu_squared = std::max(e.mu_squared, sp.sup[j] * sp.sup[j]);
	}
	double sum = 0.0;
	for (double x : cell)
		sum += x;
	const double pmin = *std::min_element(cell.begin(), cell.end()) / sum;
	e.probability_ratio = (1.0 / static_cast<double>(K)) / pmin;
	e.measured = e.probability_ratio * e.mu_squared;
	return e;
}

inline CheckReport check_c_sigma(const std::vector<SuiteMedium>& suite, double modes_fraction = 0.5) {
	CheckReport rep;
	rep.name = "c-sigma";
	rep.header = {{"slack", c_sigma_slack}, {"modes_fraction", modes_fraction}};
	auto cases = detail::parallel_map<CaseDetail>(suite.size(), [&](std::size_t i) {
		const auto& sm = suite[i];
		const auto e = estimate_c_sigma(sm.medium, modes_fraction);
		CaseDetail c;
		c.label = sm.label;
		c.seed = sm.seed;
		c.measured = e.measured;
		c.bound = e.bound;
		c.extra = {{"var_log_sigma", sm.medium.var_log_sigma()},
		           {"probability_ratio", e.probability_ratio},
		           {"mu_squared", e.mu_squared},
		           {"analytic", e.analytic},
		           {"modes", e.modes}};
		if (!e.hypothesis) {
			c.status = CaseStatus::hypothesis_failed;
			return c;
		}
		c.margin = e.bound / e.measured;
		c.status = detail::judge(c.margin);
		return c;
	});
	for (auto& c : cases)
		rep.add(std::move(c));
	return rep;
}

} // namespace cwc
