#pragma once

// Grids on [0,1] and impedance profiles sigma(x) > 0 sampled on them.

#include <cwc/rng.hpp>
#include <cwc/types.hpp>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <iomanip>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

namespace cwc {

/// Uniform grid on [0,1] with n intervals of width 1/n.
///
/// The unknowns depend on the boundary condition:
///   periodic  : x_i = i/n,      i = 0..n-1  (n unknowns)
///   dirichlet : x_i = (i+1)/n,  i = 0..n-2  (n-1 interior nodes)
///   neumann   : x_i = i/n,      i = 0..n    (n+1 nodes, end nodes carry half weight)
class Grid {
public:
	Grid(std::size_t n, Boundary bc) : n_(n), bc_(bc) {
		if (bc == Boundary::periodic)
			require(n >= 8 && std::has_single_bit(n), "periodic grid needs n >= 8 and a power of two");
		else
			require(n >= 2, "grid needs n >= 2");
	}

	std::size_t n() const { return n_; }
	Boundary bc() const { return bc_; }
	double spacing() const { return 1.0 / static_cast<double>(n_); }
	bool periodic() const { return bc_ == Boundary::periodic; }

	std::size_t size() const {
		switch (bc_) {
		case Boundary::periodic: return n_;
		case Boundary::dirichlet: return n_ - 1;
		case Boundary::neumann: return n_ + 1;
		}
		return n_;
	}

	double position(std::size_t i) const {
		const double offset = bc_ == Boundary::dirichlet ? 1.0 : 0.0;
		return (static_cast<double>(i) + offset) / static_cast<double>(n_);
	}

	Vector positions() const {
		Vector x(size());
		for (std::size_t i = 0; i < size(); ++i)
			x[i] = position(i);
		return x;
	}

	/// Trapezoid weights relative to the spacing (1 except the Neumann end nodes).
	Vector quadrature_weights() const {
		Vector w = Vector::Ones(size());
		if (bc_ == Boundary::neumann) {
			w[0] = 0.5;
			w[size() - 1] = 0.5;
		}
		return w;
	}

	/// Same boundary condition with twice the resolution.
	Grid refined() const { return Grid(2 * n_, bc_); }

	friend bool operator==(const Grid& a, const Grid& b) { return a.n_ == b.n_ && a.bc_ == b.bc_; }

private:
	std::size_t n_;
	Boundary bc_;
};

/// Sum of |log s[j+1] - log s[j]|, plus the wrap-around term when periodic.
inline double total_variation_log(const Vector& sigma, bool periodic) {
	const auto m = sigma.size();
	double var = 0.0;
	for (Eigen::Index j = 0; j + 1 < m; ++j)
		var += std::abs(std::log(sigma[j + 1]) - std::log(sigma[j]));
	if (periodic && m > 1)
		var += std::abs(std::log(sigma[0]) - std::log(sigma[m - 1]));
	return var;
}

/// Impedance samples on a grid. Immutable once constructed.
class Medium {
public:
	Medium(Grid grid, Vector sigma) : grid_(grid), sigma_(std::move(sigma)) {
		require(static_cast<std::size_t>(sigma_.size()) == grid_.size(), "medium: sample count does not match grid");
		for (Eigen::Index j = 0; j < sigma_.size(); ++j)
			require(std::isfinite(sigma_[j]) && sigma_[j] > 0.0, "medium: impedance must be positive and finite");
		sigma_min_ = sigma_.minCoeff();
		sigma_max_ = sigma_.maxCoeff();
		var_log_sigma_ = cwc::total_variation_log(sigma_, grid_.periodic());
	}

	const Grid& grid() const { return grid_; }
	std::size_t size() const { return grid_.size(); }
	const Vector& sigma() const { return sigma_; }
	double sigma_min() const { return sigma_min_; }
	double sigma_max() const { return sigma_max_; }
	double contrast() const { return sigma_max_ / sigma_min_; }
	double var_log_sigma() const { return var_log_sigma_; }

	/// Squared impedance times the trapezoid weights: the lumped mass diagonal.
	Vector mass() const { return sigma_.array().square() * grid_.quadrature_weights().array(); }

	/// Square root of mass(): the diagonal that symmetrizes the operator.
	Vector weights() const { return sigma_.array() * grid_.quadrature_weights().array().sqrt(); }

	/// Trapezoid approximation of the travel time across [0,1] (speed 1/sigma).
	double crossing_time() const {
		const double h = grid_.spacing();
		switch (grid_.bc()) {
		case Boundary::periodic:
		case Boundary::neumann:
			return h * (sigma_.array() * grid_.quadrature_weights().array()).sum();
		case Boundary::dirichlet:
			// End values at x=0 and x=1 extrapolated as the nearest sample.
			return h * (sigma_.sum() + 0.5 * (sigma_[0] + sigma_[sigma_.size() - 1]));
		}
		return 0.0;
	}

private:
	Grid grid_;
	Vector sigma_;
	double sigma_min_ = 0.0;
	double sigma_max_ = 0.0;
	double var_log_sigma_ = 0.0;
};

inline double total_variation_log(const Medium& medium) {
	return total_variation_log(medium.sigma(), medium.grid().periodic());
}

/// Contrast parameter sigma_max used by the smooth and piecewise families.
inline double contrast_parameter(int gamma) {
	return 1.0 + (9.0 / 19.0) * (gamma - 1);
}

/// The smooth family's actual sigma ratio max/min for a given sigma_max parameter.
inline double smooth_medium_ratio(double sigma_max) {
	return (5.0 * sigma_max - 3.0) / (3.0 * sigma_max - 1.0);
}

/// Inverse of smooth_medium_ratio: the sigma_max parameter giving ratio max/min.
inline double sigma_max_for_ratio(double ratio) {
	require(ratio >= 1.0 && ratio < 5.0 / 3.0, "smooth medium ratio must lie in [1, 5/3)");
	return (3.0 - ratio) / (5.0 - 3.0 * ratio);
}

/// sigma(x) = (s+1)/2 + (s-1)/2 (sin(2 pi gamma x) + 3), with s = sigma_max.
inline Medium make_smooth_medium(int gamma, double sigma_max, const Grid& grid) {
	require(gamma >= 1 && gamma <= 20, "smooth medium: gamma must lie in [1,20]");
	require(sigma_max >= 1.0, "smooth medium: sigma_max must be >= 1");
	Vector sigma(grid.size());
	for (std::size_t i = 0; i < grid.size(); ++i) {
		const double x = grid.position(i);
		sigma[i] = 0.5 * (sigma_max + 1.0) + 0.5 * (sigma_max - 1.0) * (std::sin(2.0 * pi * gamma * x) + 3.0);
	}
	return Medium(grid, std::move(sigma));
}

inline Medium make_smooth_medium(int gamma, const Grid& grid) {
	require(gamma >= 1 && gamma <= 20, "smooth medium: gamma must lie in [1,20]");
	return make_smooth_medium(gamma, contrast_parameter(gamma), grid);
}

namespace detail {

// Gaussian smoothing with a kernel truncated at 6 standard deviations
// (std given in grid cells). Circular for periodic grids, half-sample
// symmetric reflection otherwise.
inline Vector gaussian_smooth(const Vector& values, double std_cells, bool periodic) {
	const auto m = static_cast<long>(values.size());
	const long half = static_cast<long>(std::ceil(6.0 * std_cells));
	std::vector<double> kernel(static_cast<std::size_t>(2 * half + 1));
	double total = 0.0;
	for (long k = -half; k <= half; ++k) {
		const double w = std::exp(-0.5 * (k / std_cells) * (k / std_cells));
		kernel[static_cast<std::size_t>(k + half)] = w;
		total += w;
	}
	for (double& w : kernel)
		w /= total;

	auto at = [&](long i) {
		if (periodic)
			return values[((i % m) + m) % m];
		while (i < 0 || i >= m) {
			if (i < 0) i = -i - 1;
			if (i >= m) i = 2 * m - i - 1;
		}
		return values[i];
	};

	Vector out(m);
	for (long i = 0; i < m; ++i) {
		double acc = 0.0;
		for (long k = -half; k <= half; ++k)
			acc += kernel[static_cast<std::size_t>(k + half)] * at(i - k);
		out[i] = acc;
	}
	return out;
}

} // namespace detail

/// Step profile with gamma jumps at x = d/(gamma+1), d = 1..gamma, plateau
/// values drawn in [1, sigma_max] then stretched to span [1, sigma_max]
/// exactly, smoothed by a Gaussian of standard deviation 5/n.
inline Medium make_piecewise_medium(int gamma, double sigma_max, const Grid& grid, std::uint64_t seed) {
	require(gamma >= 1 && gamma <= 20, "piecewise medium: gamma must lie in [1,20]");
	require(sigma_max >= 1.0, "piecewise medium: sigma_max must be >= 1");
	auto rng = make_rng(seed, "piecewise-medium");
	std::vector<double> plateau(static_cast<std::size_t>(gamma + 1));
	for (double& p : plateau)
		p = uniform(rng, 1.0, sigma_max);
	const auto [lo, hi] = std::minmax_element(plateau.begin(), plateau.end());
	const double pmin = *lo, pmax = *hi;
	for (double& p : plateau)
		p = pmax > pmin ? 1.0 + (p - pmin) * (sigma_max - 1.0) / (pmax - pmin) : 1.0;

	Vector steps(grid.size());
	for (std::size_t i = 0; i < grid.size(); ++i) {
		const auto idx = static_cast<std::size_t>(std::floor(grid.position(i) * (gamma + 1)));
		steps[i] = plateau[std::min(idx, plateau.size() - 1)];
	}
	const double std_cells = 5.0;
	return Medium(grid, detail::gaussian_smooth(steps, std_cells, grid.periodic()));
}

inline Medium make_piecewise_medium(int gamma, const Grid& grid, std::uint64_t seed) {
	require(gamma >= 1 && gamma <= 20, "piecewise medium: gamma must lie in [1,20]");
	return make_piecewise_medium(gamma, contrast_parameter(gamma), grid, seed);
}

/// Piecewise-constant log-impedance with n_jumps jumps at random nodes.
/// Jump magnitudes are rescaled so that Var(log sigma) equals a random
/// fraction in [1/2, 1) of var_budget; sigma_min is normalized to 1.
inline Medium make_random_bv_medium(double var_budget, int n_jumps, const Grid& grid, std::uint64_t seed) {
	require(var_budget > 0.0, "random BV medium: var_budget must be positive");
	require(n_jumps >= 0 && static_cast<std::size_t>(n_jumps) < grid.size(),
	        "random BV medium: n_jumps must lie in [0, size)");
	const std::size_t m = grid.size();
	if (n_jumps == 0)
		return Medium(grid, Vector::Ones(static_cast<Eigen::Index>(m)));

	auto rng = make_rng(seed, "random-bv-medium");
	// Distinct jump nodes in [1, m-1] by partial Fisher-Yates.
	std::vector<std::size_t> nodes(m - 1);
	for (std::size_t i = 0; i < nodes.size(); ++i)
		nodes[i] = i + 1;
	for (int s = 0; s < n_jumps; ++s) {
		const auto r = static_cast<std::size_t>(s) + uniform_index(rng, nodes.size() - static_cast<std::size_t>(s));
		std::swap(nodes[static_cast<std::size_t>(s)], nodes[r]);
	}
	std::vector<std::size_t> cuts(nodes.begin(), nodes.begin() + n_jumps);
	std::sort(cuts.begin(), cuts.end());

	std::vector<double> levels(static_cast<std::size_t>(n_jumps) + 1);
	levels[0] = 0.0;
	for (std::size_t p = 1; p < levels.size(); ++p)
		levels[p] = levels[p - 1] + gaussian(rng);

	Vector log_sigma(static_cast<Eigen::Index>(m));
	std::size_t plateau = 0;
	for (std::size_t i = 0; i < m; ++i) {
		while (plateau < cuts.size() && i >= cuts[plateau])
			++plateau;
		log_sigma[static_cast<Eigen::Index>(i)] = levels[plateau];
	}
	const double raw = total_variation_log(log_sigma.array().exp().matrix(), grid.periodic());
	const double target = var_budget * (0.5 + 0.5 * uniform01(rng));
	if (raw > 0.0)
		log_sigma *= target / raw;
	log_sigma.array() -= log_sigma.minCoeff();
	Medium medium(grid, log_sigma.array().exp().matrix());
	if (medium.var_log_sigma() > var_budget) {
		// Rounding in exp/log can overshoot by an ulp when target ~ budget.
		log_sigma *= var_budget / medium.var_log_sigma() * (1.0 - 1e-12);
		return Medium(grid, log_sigma.array().exp().matrix());
	}
	return medium;
}

/// Linear interpolation of the samples onto the refined (2n) grid; constant
/// extension past the outermost samples for non-periodic grids.
inline Medium refine(const Medium& medium) {
	const Grid& coarse = medium.grid();
	const Grid fine = coarse.refined();
	const Vector& s = medium.sigma();
	const auto m = static_cast<long>(coarse.size());
	Vector out(fine.size());
	for (std::size_t i = 0; i < fine.size(); ++i) {
		// Fractional coarse index of the fine position.
		const double offset = coarse.bc() == Boundary::dirichlet ? 1.0 : 0.0;
		const double u = fine.position(i) * static_cast<double>(coarse.n()) - offset;
		const long lo = static_cast<long>(std::floor(u));
		const double f = u - static_cast<double>(lo);
		if (coarse.periodic()) {
			out[i] = (1.0 - f) * s[((lo % m) + m) % m] + f * s[(((lo + 1) % m) + m) % m];
		} else if (lo < 0) {
			out[i] = s[0];
		} else if (lo >= m - 1) {
			out[i] = s[m - 1];
		} else {
			out[i] = (1.0 - f) * s[lo] + f * s[lo + 1];
		}
	}
	return Medium(fine, std::move(out));
}

/// CSV: header line "# n,bc" followed by one impedance value per line.
inline void write_medium_csv(std::ostream& out, const Medium& medium) {
	out << "# " << medium.grid().n() << ',' << to_string(medium.grid().bc()) << '\n';
	out << std::setprecision(17);
	for (Eigen::Index j = 0; j < medium.sigma().size(); ++j)
		out << medium.sigma()[j] << '\n';
}

inline Medium read_medium_csv(std::istream& in) {
	std::string line;
	skip_manifest(in);
	require(static_cast<bool>(std::getline(in, line)) && line.rfind("# ", 0) == 0, "medium csv: missing '# n,bc' header");
	const auto comma = line.find(',');
	require(comma != std::string::npos, "medium csv: malformed header");
	const auto n = static_cast<std::size_t>(std::stoul(line.substr(2, comma - 2)));
	Grid grid(n, parse_boundary(line.substr(comma + 1)));
	Vector sigma(grid.size());
	Eigen::Index j = 0;
	while (std::getline(in, line)) {
		if (line.empty() || line[0] == '#')
			continue;
		require(j < sigma.size(), "medium csv: too many samples");
		sigma[j++] = std::stod(line);
	}
	require(j == sigma.size(), "medium csv: too few samples");
	return Medium(grid, std::move(sigma));
}

} // namespace cwc
