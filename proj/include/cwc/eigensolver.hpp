#pragma once

// Eigenpairs (omega, v) of Sigma^-2 L with L v = -omega^2 Sigma^2 v.
// Vectors are normalized so that sum_j m_j v_j^2 = 1 (m the lumped mass),
// which makes the rows sigma_j v_j of the measurement matrix unit vectors.

#include <cwc/krylov.hpp>
#include <cwc/operators.hpp>
#include <cwc/rng.hpp>
#include <cwc/types.hpp>

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <bit>
#include <cmath>
#include <concepts>
#include <cstdint>
#include <cstring>
#include <iomanip>
#include <istream>
#include <limits>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

namespace cwc {

struct EigenPair {
	double omega = 0.0;
	Vector vector;
	double residual = 0.0; // ||Lw v + omega^2 v|| / (||v|| omega_max^2)
};

struct EigenSet {
	std::size_t n = 0; // grid intervals
	Boundary bc = Boundary::periodic;
	std::uint64_t seed = 0;
	double omega_max = 0.0;
	std::vector<EigenPair> pairs; // sorted by omega

	std::size_t k() const { return pairs.size(); }

	Vector omegas() const {
		Vector w(static_cast<Eigen::Index>(pairs.size()));
		for (std::size_t i = 0; i < pairs.size(); ++i)
			w[static_cast<Eigen::Index>(i)] = pairs[i].omega;
		return w;
	}

	/// Vectors as columns (size x k).
	Matrix vectors() const {
		require(!pairs.empty(), "eigenset is empty");
		Matrix V(pairs.front().vector.size(), static_cast<Eigen::Index>(pairs.size()));
		for (std::size_t i = 0; i < pairs.size(); ++i)
			V.col(static_cast<Eigen::Index>(i)) = pairs[i].vector;
		return V;
	}
};

/// Two eigenvalues closer than this are treated as one (possibly 2D) eigenspace.
inline double dedup_tolerance(double omega_max) {
	return 1e-8 * omega_max;
}

namespace detail {

// Deterministic sign: the largest-magnitude entry (first on ties) is positive.
inline void fix_sign(Vector& v) {
	Eigen::Index arg = 0;
	v.cwiseAbs().maxCoeff(&arg);
	if (v[arg] < 0.0)
		v = -v;
}

inline double residual_of(const WaveOperator& op, const Vector& v, double omega, double omega_max) {
	const Vector r = op.apply_weighted(v) + omega * omega * v;
	return r.norm() / (v.norm() * omega_max * omega_max);
}

// omega = sqrt(-lambda), with round-off sized lambdas of either sign mapped to 0.
inline double omega_from_lambda(double lambda, double scale) {
	if (std::abs(lambda) <= std::max(1e-8, 1e-13 * scale))
		return 0.0;
	return std::sqrt(std::max(-lambda, 0.0));
}

inline void sort_pairs(std::vector<EigenPair>& pairs) {
	std::stable_sort(pairs.begin(), pairs.end(),
	                 [](const EigenPair& a, const EigenPair& b) { return a.omega < b.omega; });
}

} // namespace detail

/// Complete dense eigendecomposition of W = S^-1 K S^-1.
inline EigenSet full_decomposition(const WaveOperator& op) {
	const auto dense = op.assemble_dense_symmetrized();
	Eigen::SelfAdjointEigenSolver<Matrix> solver(dense.W);
	if (solver.info() != Eigen::Success)
		throw NumericalError("dense eigendecomposition failed");
	const Vector& lambda = solver.eigenvalues();
	const Matrix& Wv = solver.eigenvectors();
	const double scale = lambda.cwiseAbs().maxCoeff();
	const Eigen::Index m = op.size();

	EigenSet set;
	set.n = op.grid().n();
	set.bc = op.grid().bc();
	set.omega_max = std::sqrt(std::max(-lambda.minCoeff(), 0.0));
	set.pairs.resize(static_cast<std::size_t>(m));
	const Matrix R = dense.W * Wv - Wv * lambda.asDiagonal();
	for (Eigen::Index i = 0; i < m; ++i) {
		if (lambda[i] > 1e-8 * std::max(scale, 1.0))
			throw NumericalError("operator has a positive eigenvalue; W is not negative semi-definite");
		EigenPair& p = set.pairs[static_cast<std::size_t>(i)];
		p.omega = detail::omega_from_lambda(lambda[i], scale);
		p.vector = (Wv.col(i).array() / op.weights().array()).matrix();
		detail::fix_sign(p.vector);
		p.residual = R.col(i).norm() / std::max(scale, 1.0);
	}
	detail::sort_pairs(set.pairs);
	return set;
}

/// Largest omega by power iteration on -W. Iterates until the Rayleigh quotient
/// at step k differs from the one at step k/2 by at most rel_tol (relative),
/// which guards against the slow creep of clustered upper spectra.
inline double estimate_omega_max(const WaveOperator& op, double rel_tol = 1e-6, int max_iter = 200000) {
	auto rng = make_rng(0x6f6d6178ULL, "omega-max");
	Vector x(op.size());
	for (Eigen::Index j = 0; j < x.size(); ++j)
		x[j] = gaussian(rng);
	x.normalize();
	std::vector<double> history;
	history.reserve(1024);
	for (int it = 1; it <= max_iter; ++it) {
		Vector y = -op.apply_symmetrized(x);
		const double rq = x.dot(y);
		history.push_back(rq);
		const double norm = y.norm();
		if (norm == 0.0)
			return 0.0;
		x = y / norm;
		if (it >= 8) {
			const double past = history[static_cast<std::size_t>(it / 2)];
			if (std::abs(rq - past) <= rel_tol * std::abs(rq))
				return std::sqrt(rq);
		}
	}
	throw NumericalError("power iteration for omega_max did not stabilize");
}

struct ShiftInvertOptions {
	double omega_max = 0.0;        // 0: estimate by power iteration
	double residual_tol = 1e-12;   // ||W w - theta w|| / omega_max^2 for acceptance
	int block = 4;
	int max_outer = 200;
	double inner_tol_start = 1e-4;
	double inner_tol_floor = 1e-12;
	bool precondition = true;      // periodic grids only
};

struct NearestResult {
	std::vector<EigenPair> pairs; // one, or two for a 2D eigenspace
	bool shift_perturbed = false;
	int outer_iterations = 0;
	Eigen::Index inner_iterations = 0;
};

namespace detail {

// Pick the Ritz value nearest the shift; near-ties go to the smaller omega.
inline Eigen::Index nearest_ritz(const Vector& omega, double shift, double tie) {
	Eigen::Index best = 0;
	for (Eigen::Index i = 1; i < omega.size(); ++i) {
		const double di = std::abs(omega[i] - shift), db = std::abs(omega[best] - shift);
		if (di < db - tie || (std::abs(di - db) <= tie && omega[i] < omega[best]))
			best = i;
	}
	return best;
}

inline NearestResult shift_invert_attempt(const WaveOperator& op, double shift, double reported_shift,
                                          const ShiftInvertOptions& opt, double omega_max) {
	const Eigen::Index n = op.size();
	const Eigen::Index p = std::min<Eigen::Index>(opt.block, n);
	const double shift2 = shift * shift;
	const double scale = omega_max * omega_max;
	const double tie = dedup_tolerance(omega_max);

	auto rng = make_rng(std::bit_cast<std::uint64_t>(shift), "shift-invert-start");
	Matrix X(n, p);
	for (Eigen::Index j = 0; j < n; ++j)
		for (Eigen::Index c = 0; c < p; ++c)
			X(j, c) = gaussian(rng);
	X = Eigen::HouseholderQR<Matrix>(X).householderQ() * Matrix::Identity(n, p);

	const ShiftedSymmetrized A{&op, shift2};
	std::optional<ConstantMediumPreconditioner> fourier;
	if (opt.precondition && op.form() == OperatorForm::spectral)
		fourier.emplace(n, op.medium().sigma().mean(), shift2);

	NearestResult out;
	double inner_tol = opt.inner_tol_start;
	const Eigen::Index inner_cap = 4 * n + 100;
	for (int outer = 1; outer <= opt.max_outer; ++outer) {
		Matrix Y(n, p);
		for (Eigen::Index c = 0; c < p; ++c) {
			const Vector rhs = X.col(c);
			const MinresResult solve = fourier ? minres(A, rhs, *fourier, inner_tol, inner_cap)
			                                   : minres(A, rhs, IdentityPreconditioner{}, inner_tol, inner_cap);
			out.inner_iterations += solve.iterations;
			if (!solve.finite || solve.x.norm() == 0.0)
				throw NumericalError("inner solve breakdown");
			Y.col(c) = solve.x;
		}
		const Eigen::HouseholderQR<Matrix> qr(Y);
		const Matrix Q = qr.householderQ() * Matrix::Identity(n, p);
		const Matrix WQ = op.apply_symmetrized(Q);
		Matrix H = Q.transpose() * WQ;
		H = 0.5 * (H + H.transpose()).eval();
		Eigen::SelfAdjointEigenSolver<Matrix> small(H);
		const Vector theta = small.eigenvalues();
		const Matrix U = small.eigenvectors();
		const Matrix Z = Q * U;
		const Matrix R = WQ * U - Z * theta.asDiagonal();

		Vector omega(p), res(p);
		for (Eigen::Index i = 0; i < p; ++i) {
			omega[i] = omega_from_lambda(theta[i], scale);
			res[i] = R.col(i).norm() / scale;
		}
		const Eigen::Index best = nearest_ritz(omega, reported_shift, tie);
		std::vector<Eigen::Index> group{best};
		for (Eigen::Index i = 0; i < p; ++i)
			if (i != best && std::abs(omega[i] - omega[best]) <= tie)
				group.push_back(i);
		bool done = true;
		for (Eigen::Index i : group)
			done = done && res[i] <= opt.residual_tol;

		if (done) {
			out.outer_iterations = outer;
			std::sort(group.begin(), group.end());
			for (Eigen::Index i : group) {
				EigenPair pair;
				pair.omega = omega[i];
				pair.vector = (Z.col(i).array() / op.weights().array()).matrix();
				pair.vector /= std::sqrt((op.mass().array() * pair.vector.array().square()).sum());
				fix_sign(pair.vector);
				pair.residual = residual_of(op, pair.vector, pair.omega, omega_max);
				out.pairs.push_back(std::move(pair));
			}
			// A 2D eigenspace is reported with the smaller Ritz value first.
			sort_pairs(out.pairs);
			return out;
		}

		// Order the block by distance to the shift for the next sweep.
		std::vector<Eigen::Index> order(static_cast<std::size_t>(p));
		for (Eigen::Index i = 0; i < p; ++i)
			order[static_cast<std::size_t>(i)] = i;
		std::stable_sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) {
			return std::abs(omega[a] - shift) < std::abs(omega[b] - shift);
		});
		for (Eigen::Index c = 0; c < p; ++c)
			X.col(c) = Z.col(order[static_cast<std::size_t>(c)]);
		inner_tol = std::max(inner_tol * 0.1, opt.inner_tol_floor);
	}
	throw NumericalError("shift-invert iteration did not converge");
}

} // namespace detail

/// Eigenpair whose omega is nearest to shift_omega, by block inverse iteration
/// on (W + shift^2 I) with MINRES inner solves and Rayleigh-Ritz extraction.
inline NearestResult nearest_eigenpair(const WaveOperator& op, double shift_omega, ShiftInvertOptions opt = {}) {
	if (opt.omega_max <= 0.0)
		opt.omega_max = estimate_omega_max(op);
	require(shift_omega >= 0.0 && shift_omega <= opt.omega_max * (1.0 + 1e-6),
	        "shift must lie in [0, omega_max]");
	try {
		return detail::shift_invert_attempt(op, shift_omega, shift_omega, opt, opt.omega_max);
	} catch (const NumericalError&) {
		// Shift on top of an eigenvalue (or stalled): nudge it and retry once.
		const double nudge = 1e-7 * opt.omega_max;
		const double moved = shift_omega + nudge <= opt.omega_max ? shift_omega + nudge : shift_omega - nudge;
		NearestResult r = detail::shift_invert_attempt(op, moved, shift_omega, opt, opt.omega_max);
		r.shift_perturbed = true;
		return r;
	}
}

/// Anything that maps a shift to the nearest eigenpair (or 2D eigenspace).
template <class R>
concept EigenResolver = requires(const R& r, double shift) {
	{ r.resolve(shift) } -> std::same_as<std::vector<EigenPair>>;
	{ r.omega_max() } -> std::convertible_to<double>;
	{ r.size() } -> std::convertible_to<std::size_t>;
	{ r.grid() } -> std::convertible_to<Grid>;
};

/// Matrix-free production resolver.
class ShiftInvertResolver {
public:
	explicit ShiftInvertResolver(const WaveOperator& op, ShiftInvertOptions opt = {}) : op_(&op), opt_(opt) {
		if (opt_.omega_max <= 0.0)
			opt_.omega_max = estimate_omega_max(op);
	}

	std::vector<EigenPair> resolve(double shift) const {
		NearestResult r = nearest_eigenpair(*op_, std::min(shift, opt_.omega_max), opt_);
		perturbed_ += r.shift_perturbed ? 1 : 0;
		return std::move(r.pairs);
	}

	double omega_max() const { return opt_.omega_max; }
	std::size_t size() const { return static_cast<std::size_t>(op_->size()); }
	Grid grid() const { return op_->grid(); }
	int perturbed_shifts() const { return perturbed_; }

private:
	const WaveOperator* op_;
	ShiftInvertOptions opt_;
	mutable int perturbed_ = 0;
};

/// Nearest-cluster lookup in a precomputed complete decomposition. Draws the
/// same eigensets as the shift-invert path at a fraction of the cost, which
/// is what parameter sweeps need.
class SpectrumResolver {
public:
	explicit SpectrumResolver(EigenSet full) : full_(std::move(full)) {
		omegas_.reserve(full_.pairs.size());
		for (const auto& p : full_.pairs)
			omegas_.push_back(p.omega);
	}

	explicit SpectrumResolver(const WaveOperator& op) : SpectrumResolver(full_decomposition(op)) {}

	std::vector<EigenPair> resolve(double shift) const {
		const double tie = dedup_tolerance(full_.omega_max);
		auto it = std::lower_bound(omegas_.begin(), omegas_.end(), shift);
		std::size_t best;
		if (it == omegas_.end()) {
			best = omegas_.size() - 1;
		} else if (it == omegas_.begin()) {
			best = 0;
		} else {
			const auto hi = static_cast<std::size_t>(it - omegas_.begin());
			const std::size_t lo = hi - 1;
			const double dlo = shift - omegas_[lo], dhi = omegas_[hi] - shift;
			best = dhi < dlo - tie ? hi : lo;
		}
		// Expand to the whole cluster within the dedup tolerance.
		std::size_t first = best, last = best;
		while (first > 0 && omegas_[best] - omegas_[first - 1] <= tie)
			--first;
		while (last + 1 < omegas_.size() && omegas_[last + 1] - omegas_[best] <= tie)
			++last;
		return {full_.pairs.begin() + static_cast<std::ptrdiff_t>(first),
		        full_.pairs.begin() + static_cast<std::ptrdiff_t>(last + 1)};
	}

	double omega_max() const { return full_.omega_max; }
	std::size_t size() const { return full_.pairs.size(); }
	Grid grid() const { return Grid(full_.n, full_.bc); }
	const EigenSet& full() const { return full_; }

private:
	EigenSet full_;
	std::vector<double> omegas_;
};

struct DrawOptions {
	bool include_endpoints = true;
	std::size_t max_draws = 0; // 0: 200 * size + 1000
};

/// Random eigenset: shifts uniform on [0, omega_max], each resolved to its
/// nearest eigenspace, duplicates rejected, until at least k vectors are held.
/// A 2D eigenspace arriving last can overshoot k by one.
template <EigenResolver R>
EigenSet draw_eigenset(const R& resolver, std::size_t k, std::uint64_t seed, DrawOptions opt = {}) {
	require(k >= 1 && k <= resolver.size(), "eigenset size k must lie in [1, n]");
	const double omega_max = resolver.omega_max();
	const double tie = dedup_tolerance(omega_max);
	const std::size_t max_draws = opt.max_draws ? opt.max_draws : 200 * resolver.size() + 1000;

	EigenSet set;
	set.n = resolver.grid().n();
	set.bc = resolver.grid().bc();
	set.seed = seed;
	set.omega_max = omega_max;
	std::vector<double> held; // distinct omegas, sorted

	auto add = [&](std::vector<EigenPair> found) {
		if (found.empty())
			return;
		const double w = found.front().omega;
		auto it = std::lower_bound(held.begin(), held.end(), w - tie);
		if (it != held.end() && *it <= w + tie)
			return;
		held.insert(it, w);
		for (auto& p : found)
			set.pairs.push_back(std::move(p));
	};

	if (opt.include_endpoints) {
		add(resolver.resolve(0.0));
		if (set.k() < k)
			add(resolver.resolve(omega_max));
	}
	auto rng = make_rng(seed, "eigenset-shifts");
	std::size_t draws = 0;
	while (set.k() < k) {
		if (++draws > max_draws)
			throw NumericalError("could not collect k distinct eigenvectors within the draw budget");
		add(resolver.resolve(uniform(rng, 0.0, omega_max)));
	}
	detail::sort_pairs(set.pairs);
	return set;
}

// ---------------------------------------------------------------------------
// Faithfulness: compare the n-grid spectrum with a 2n refinement.

struct FaithfulnessReport {
	std::size_t k_check = 0;
	double worst_gap_factor = 1.0;  // max over modes of max(g/g_ref, g_ref/g)
	double worst_norm_factor = 1.0; // same for max_j |sigma v| under matched L2 normalization
	std::size_t worst_gap_mode = 0;
	std::size_t worst_norm_mode = 0;
	bool passed() const { return worst_gap_factor <= 2.0 && worst_norm_factor <= 2.0; }
};

namespace detail {

// Distinct-eigenvalue clusters: (omega, representative sup norm) per cluster.
struct Cluster {
	double omega;
	double sup; // max_j |sigma v| with (1/N) sum m v^2 = 1
};

inline std::vector<Cluster> clusters(const WaveOperator& op, const EigenSet& set, std::size_t limit) {
	std::vector<Cluster> out;
	const double tie = std::max(dedup_tolerance(set.omega_max), 1e-9 * set.omega_max);
	const double root_n = std::sqrt(static_cast<double>(op.grid().n()));
	for (const auto& p : set.pairs) {
		// Unit rows sum m v^2 = 1 become (1/N) sum m v^2 = 1 after scaling by sqrt(N).
		const double sup = root_n * (op.weights().array() * p.vector.array()).abs().maxCoeff();
		if (!out.empty() && p.omega - out.back().omega <= tie) {
			out.back().sup = std::max(out.back().sup, sup);
			continue;
		}
		if (out.size() == limit)
			break;
		out.push_back({p.omega, sup});
	}
	return out;
}

inline double factor(double a, double b) {
	if (a <= 0.0 || b <= 0.0)
		return std::numeric_limits<double>::infinity();
	return std::max(a / b, b / a);
}

} // namespace detail

inline FaithfulnessReport faithfulness_report(const Medium& medium, std::size_t k_check) {
	const WaveOperator coarse(medium);
	const WaveOperator fine(refine(medium));
	const auto c = detail::clusters(coarse, full_decomposition(coarse), k_check + 1);
	const auto f = detail::clusters(fine, full_decomposition(fine), k_check + 1);
	FaithfulnessReport rep;
	const std::size_t modes = std::min({k_check, c.size(), f.size()});
	rep.k_check = modes;
	for (std::size_t i = 0; i < modes; ++i) {
		const double nf = detail::factor(c[i].sup, f[i].sup);
		if (nf > rep.worst_norm_factor) {
			rep.worst_norm_factor = nf;
			rep.worst_norm_mode = i;
		}
		if (i + 1 < c.size() && i + 1 < f.size()) {
			const double gf = detail::factor(c[i + 1].omega - c[i].omega, f[i + 1].omega - f[i].omega);
			if (gf > rep.worst_gap_factor) {
				rep.worst_gap_factor = gf;
				rep.worst_gap_mode = i;
			}
		}
	}
	return rep;
}

// ---------------------------------------------------------------------------
// Persistence. Text header, 17-digit omegas, vectors as CSV rows or raw
// little-endian doubles.

enum class VectorFormat { csv, binary };

inline void write_eigenset(std::ostream& out, const EigenSet& set, VectorFormat fmt) {
	const std::size_t len = set.pairs.empty() ? 0 : static_cast<std::size_t>(set.pairs.front().vector.size());
	out << "# eigenset n=" << set.n << " bc=" << to_string(set.bc) << " seed=" << set.seed << " k=" << set.k()
	    << std::setprecision(17) << " omega_max=" << set.omega_max << " length=" << len
	    << " format=" << (fmt == VectorFormat::csv ? "csv" : "binary") << '\n';
	for (const auto& p : set.pairs) {
		out << p.omega << ',' << p.residual;
		if (fmt == VectorFormat::csv) {
			for (Eigen::Index j = 0; j < p.vector.size(); ++j)
				out << ',' << p.vector[j];
			out << '\n';
		} else {
			out << '\n';
			for (Eigen::Index j = 0; j < p.vector.size(); ++j) {
				std::uint64_t bits = std::bit_cast<std::uint64_t>(p.vector[j]);
				unsigned char bytes[8];
				for (int b = 0; b < 8; ++b)
					bytes[b] = static_cast<unsigned char>(bits >> (8 * b));
				out.write(reinterpret_cast<const char*>(bytes), 8);
			}
		}
	}
}

inline EigenSet read_eigenset(std::istream& in) {
	std::string header;
	skip_manifest(in);
	require(static_cast<bool>(std::getline(in, header)) && header.rfind("# eigenset", 0) == 0,
	        "eigenset: missing header");
	auto field = [&](const std::string& key) {
		const auto pos = header.find(" " + key + "=");
		require(pos != std::string::npos, "eigenset: header lacks " + key);
		const auto start = pos + key.size() + 2;
		return header.substr(start, header.find(' ', start) - start);
	};
	EigenSet set;
	set.n = std::stoull(field("n"));
	set.bc = parse_boundary(field("bc"));
	set.seed = std::stoull(field("seed"));
	set.omega_max = std::stod(field("omega_max"));
	const std::size_t k = std::stoull(field("k"));
	const auto len = static_cast<Eigen::Index>(std::stoll(field("length")));
	const bool binary = field("format") == "binary";
	for (std::size_t i = 0; i < k; ++i) {
		std::string line;
		require(static_cast<bool>(std::getline(in, line)), "eigenset: truncated");
		std::stringstream row(line);
		std::string cell;
		EigenPair p;
		std::getline(row, cell, ',');
		p.omega = std::stod(cell);
		std::getline(row, cell, ',');
		p.residual = std::stod(cell);
		p.vector.resize(len);
		for (Eigen::Index j = 0; j < len; ++j) {
			if (binary) {
				unsigned char bytes[8];
				require(static_cast<bool>(in.read(reinterpret_cast<char*>(bytes), 8)), "eigenset: truncated vector");
				std::uint64_t bits = 0;
				for (int b = 0; b < 8; ++b)
					bits |= static_cast<std::uint64_t>(bytes[b]) << (8 * b);
				p.vector[j] = std::bit_cast<double>(bits);
			} else {
				require(static_cast<bool>(std::getline(row, cell, ',')), "eigenset: short vector row");
				p.vector[j] = std::stod(cell);
			}
		}
		set.pairs.push_back(std::move(p));
	}
	return set;
}

} // namespace cwc
