#include <cwc/operators.hpp>
#include <cwc/rng.hpp>

#include <Eigen/Eigenvalues>
#include <gtest/gtest.h>

#include <cmath>

using namespace cwc;

namespace {

Vector random_vector(Eigen::Index n, Rng& rng) {
	Vector v(n);
	for (Eigen::Index j = 0; j < n; ++j)
		v[j] = gaussian(rng);
	return v;
}

Medium random_medium(const Grid& g, Rng& rng) {
	Vector s(g.size());
	for (Eigen::Index j = 0; j < s.size(); ++j)
		s[j] = uniform(rng, 0.7, 2.5);
	return Medium(g, s);
}

// Periodic second-derivative matrix from the cosine sum of the symbol.
Matrix circulant_laplacian(int n) {
	Matrix L(n, n);
	for (int j = 0; j < n; ++j)
		for (int k = 0; k < n; ++k) {
			double acc = 0.0;
			for (int m = -n / 2 + 1; m <= n / 2; ++m)
				acc += -4.0 * pi * pi * m * m * std::cos(2.0 * pi * m * (j - k) / n);
			L(j, k) = acc / n;
		}
	return L;
}

// Stiffness and lumped mass assembled entry by entry.
Matrix fd_stiffness(const Grid& g) {
	const auto m = static_cast<Eigen::Index>(g.size());
	const double n2 = double(g.n()) * double(g.n());
	Matrix K = Matrix::Zero(m, m);
	for (Eigen::Index j = 0; j < m; ++j) {
		K(j, j) = -2.0 * n2;
		if (j > 0) K(j, j - 1) = n2;
		if (j + 1 < m) K(j, j + 1) = n2;
	}
	if (g.bc() == Boundary::neumann) {
		K(0, 0) = -n2;
		K(m - 1, m - 1) = -n2;
	}
	return K;
}

} // namespace

TEST(SpectralLaplacian, ConstantIsAnnihilated) {
	const WaveOperator op(Medium(Grid(64, Boundary::periodic), Vector::Ones(64)));
	EXPECT_LE(op.apply_laplacian(Vector::Constant(64, 3.7)).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(SpectralLaplacian, SingleModes) {
	const int n = 128;
	const Grid g(n, Boundary::periodic);
	const WaveOperator op(Medium(g, Vector::Ones(n)));
	for (int m : {1, 5, 17, 63, 64}) {
		Vector v(n);
		for (int j = 0; j < n; ++j)
			v[j] = std::cos(2.0 * pi * m * j / n + 0.3);
		if (m == 64)
			for (int j = 0; j < n; ++j)
				v[j] = std::cos(pi * j);
		const Vector Lv = op.apply_laplacian(v);
		const double symbol = -4.0 * pi * pi * m * m;
		// Transform round-off leaks into every bin, so the scale is the largest symbol.
		const double top = 4.0 * pi * pi * (n / 2) * (n / 2);
		EXPECT_LE((Lv - symbol * v).norm(), 1e-14 * top * v.norm()) << "mode " << m;
	}
}

TEST(SpectralLaplacian, CirculantFirstRow) {
	const int n = 8;
	const WaveOperator op(Medium(Grid(n, Boundary::periodic), Vector::Ones(n)));
	const Matrix oracle = circulant_laplacian(n);
	const Matrix W = op.assemble_dense_symmetrized().W;
	EXPECT_LE((W - oracle).cwiseAbs().maxCoeff(), 1e-12 * oracle.cwiseAbs().maxCoeff());
	for (int j = 1; j < n; ++j)
		for (int k = 0; k < n; ++k)
			EXPECT_NEAR(W(j, k), W(0, (k - j + n) % n), 1e-10);
}

TEST(FiniteDifference, DirichletSineEigenvector) {
	const int n = 64;
	const Grid g(n, Boundary::dirichlet);
	const WaveOperator op(Medium(g, Vector::Ones(g.size())));
	Vector v(g.size());
	for (Eigen::Index j = 0; j < v.size(); ++j)
		v[j] = std::sin(pi * g.position(static_cast<std::size_t>(j)));
	const double lambda = -4.0 * n * n * std::pow(std::sin(pi / (2.0 * n)), 2);
	EXPECT_LE((op.apply_laplacian(v) - lambda * v).norm(), 1e-12 * std::abs(lambda) * v.norm());
}

TEST(FiniteDifference, DirichletDenseIsClassicalStencil) {
	const Grid g(4, Boundary::dirichlet);
	const WaveOperator op(Medium(g, Vector::Ones(3)));
	Matrix expected(3, 3);
	expected << -2, 1, 0, 1, -2, 1, 0, 1, -2;
	EXPECT_LE((op.assemble_dense_symmetrized().W - 16.0 * expected).norm(), 1e-12);
}

TEST(FiniteDifference, NeumannMirrorClosure) {
	const int n = 16;
	const Grid g(n, Boundary::neumann);
	Rng rng = make_rng(1, "neumann");
	const Vector v = random_vector(17, rng);
	const Vector Lv = WaveOperator(Medium(g, Vector::Ones(17))).apply_laplacian(v);
	EXPECT_NEAR(Lv[0], n * n * 2.0 * (v[1] - v[0]), 1e-10);
	EXPECT_NEAR(Lv[16], n * n * 2.0 * (v[15] - v[16]), 1e-10);
	EXPECT_NEAR(Lv[5], n * n * (v[4] - 2.0 * v[5] + v[6]), 1e-10);
}

TEST(WeightedOperator, ScalingAndIdentity) {
	const int n = 64;
	Rng rng = make_rng(2, "weighted");
	const Vector v = random_vector(n, rng);
	const Grid g(n, Boundary::periodic);
	const WaveOperator unit(Medium(g, Vector::Ones(n)));
	EXPECT_EQ(unit.apply_weighted(v), unit.apply_laplacian(v));
	const WaveOperator two(Medium(g, Vector::Constant(n, 2.0)));
	Vector mode(n);
	for (int j = 0; j < n; ++j)
		mode[j] = std::sin(2.0 * pi * 3 * j / n);
	const double expected = -4.0 * pi * pi * 9.0 / 4.0;
	EXPECT_LE((two.apply_weighted(mode) - expected * mode).norm(), 1e-12 * std::abs(expected) * mode.norm());
}

TEST(WeightedOperator, MatchesDenseOracle) {
	Rng rng = make_rng(3, "dense-oracle");
	for (Boundary bc : {Boundary::periodic, Boundary::dirichlet, Boundary::neumann}) {
		const Grid g(32, bc);
		const Medium med = random_medium(g, rng);
		const WaveOperator op(med);
		const Matrix K = bc == Boundary::periodic ? circulant_laplacian(32) : fd_stiffness(g);
		const Vector v = random_vector(static_cast<Eigen::Index>(g.size()), rng);
		const Vector expected = (K * v).array() / med.mass().array();
		EXPECT_LE((op.apply_weighted(v) - expected).norm(), 1e-10 * expected.norm()) << to_string(bc);
	}
}

TEST(SymmetrizedOperator, AdjointAndSemidefinite) {
	Rng rng = make_rng(4, "adjoint");
	for (Boundary bc : {Boundary::periodic, Boundary::dirichlet, Boundary::neumann}) {
		const Grid g(128, bc);
		const WaveOperator op(random_medium(g, rng));
		const auto m = static_cast<Eigen::Index>(g.size());
		for (int trial = 0; trial < 100; ++trial) {
			const Vector x = random_vector(m, rng), y = random_vector(m, rng);
			const Vector Wx = op.apply_symmetrized(x), Wy = op.apply_symmetrized(y);
			EXPECT_LE(std::abs(Wx.dot(y) - x.dot(Wy)), 1e-12 * Wx.norm() * y.norm());
			EXPECT_LE(Wx.dot(x), 1e-10 * x.squaredNorm());
			// Weighted self-adjointness of Sigma^-2 L in the mass inner product.
			const double a = weighted_dot(op, op.apply_weighted(x), y);
			const double b = weighted_dot(op, x, op.apply_weighted(y));
			const Vector sx = op.weights().cwiseProduct(x), sly = op.weights().cwiseProduct(op.apply_weighted(y));
			EXPECT_LE(std::abs(a - b), 1e-12 * sx.norm() * sly.norm());
		}
	}
}

TEST(SymmetrizedOperator, DenseSpectrumNonPositive) {
	Rng rng = make_rng(5, "nsd");
	for (Boundary bc : {Boundary::periodic, Boundary::dirichlet, Boundary::neumann}) {
		const WaveOperator op(random_medium(Grid(64, bc), rng));
		const auto dense = op.assemble_dense_symmetrized();
		EXPECT_LE(dense.asymmetry, 1e-10);
		const Vector ev = Eigen::SelfAdjointEigenSolver<Matrix>(dense.W).eigenvalues();
		EXPECT_LE(ev.maxCoeff(), 1e-8 * ev.cwiseAbs().maxCoeff());
	}
}

TEST(SymmetrizedOperator, LengthMismatch) {
	const WaveOperator op(Medium(Grid(16, Boundary::periodic), Vector::Ones(16)));
	EXPECT_THROW(op.apply_laplacian(Vector::Ones(15)), ParameterError);
}
