#include <cwc/theory_checks.hpp>

#include <gtest/gtest.h>

#include <cmath>
#include <numeric>
#include <set>
#include <sstream>

using namespace cwc;

namespace {

std::vector<SuiteMedium> flat(std::size_t n, Boundary bc) {
	const Grid g(n, bc);
	return {{Medium(g, Vector::Ones(static_cast<Eigen::Index>(g.size()))), 0, "flat"}};
}

std::vector<SuiteMedium> single(Medium m, std::string label) { return {{std::move(m), 0, std::move(label)}}; }

/// Two plateaus with a jump of log-size var in the middle.
Medium step_medium(std::size_t n, Boundary bc, double var) {
	const Grid g(n, bc);
	Vector s(g.size());
	for (std::size_t i = 0; i < g.size(); ++i)
		s[static_cast<Eigen::Index>(i)] = g.position(i) < 0.5 ? 1.0 : std::exp(var);
	return Medium(g, s);
}

} // namespace

TEST(Report, CountsAndWorstMargin) {
	CheckReport r;
	r.add({"a", 1, CaseStatus::pass, 1.0, 2.0, 2.0});
	r.add({"b", 2, CaseStatus::violation, 3.0, 2.0, 0.5});
	r.add({"c", 3, CaseStatus::hypothesis_failed, 0.0, 0.0, 0.01});
	EXPECT_EQ(r.n_cases, 3u);
	EXPECT_EQ(r.n_violations, 1u);
	EXPECT_EQ(r.n_skipped, 1u);
	EXPECT_DOUBLE_EQ(r.worst_margin, 0.5);
	EXPECT_FALSE(r.passed());
}

TEST(Report, JsonLinesRoundTrip) {
	CheckReport r;
	r.name = "demo";
	r.header = {{"slack", 2.0}};
	r.add({"a", 42, CaseStatus::pass, 1.0, 2.0, 2.0});
	r.add({"b", 43, CaseStatus::hypothesis_failed});
	std::ostringstream out;
	write_json_lines(out, r);
	std::istringstream in(out.str());
	std::string line;
	std::vector<nlohmann::json> lines;
	while (std::getline(in, line))
		lines.push_back(nlohmann::json::parse(line));
	ASSERT_EQ(lines.size(), 3u);
	EXPECT_EQ(lines[0]["check"], "demo");
	EXPECT_EQ(lines[0]["n_cases"], 2);
	EXPECT_EQ(lines[0]["slack"], 2.0);
	EXPECT_EQ(lines[1]["seed"], 42);
	EXPECT_EQ(lines[2]["status"], "hypothesis-failed");
	EXPECT_TRUE(lines[2]["margin"].is_null());
}

TEST(Report, ParallelMapKeepsOrderAndRethrows) {
	const auto sq = detail::parallel_map<int>(50, [](std::size_t i) { return static_cast<int>(i * i); });
	for (std::size_t i = 0; i < sq.size(); ++i)
		EXPECT_EQ(sq[i], static_cast<int>(i * i));
	EXPECT_THROW(detail::parallel_map<int>(5,
	                                       [](std::size_t i) -> int {
		                                       if (i == 3)
			                                       throw NumericalError("boom");
		                                       return 0;
	                                       }),
	             NumericalError);
}

TEST(Suites, MediaRespectTheVariationBudgetAndAreSeeded) {
	const auto a = random_media_suite(6, 1.5, 128, Boundary::dirichlet, 9);
	const auto b = random_media_suite(6, 1.5, 128, Boundary::dirichlet, 9);
	for (std::size_t i = 0; i < a.size(); ++i) {
		EXPECT_LE(a[i].medium.var_log_sigma(), 1.5);
		EXPECT_GE(a[i].medium.var_log_sigma(), 0.75 - 1e-12);
		EXPECT_EQ(a[i].medium.sigma(), b[i].medium.sigma());
	}
}

TEST(Gaps, FlatDirichletGapsArePi) {
	const auto r = check_gap_bounds(flat(256, Boundary::dirichlet), 0.05);
	ASSERT_EQ(r.n_cases, 1u);
	const auto& c = r.cases[0];
	EXPECT_EQ(c.status, CaseStatus::pass);
	EXPECT_NEAR(c.extra["min_gap"].get<double>(), pi, 0.01 * pi);
	EXPECT_NEAR(c.extra["max_gap"].get<double>(), pi, 1e-3);
	EXPECT_NEAR(c.margin, 2.0, 0.05);
}

TEST(Gaps, RandomMediaNoViolations) {
	const auto suite = random_media_suite(4, 2.0, 128, Boundary::dirichlet, 3);
	const auto r = check_gap_bounds(suite, 0.5);
	EXPECT_EQ(r.n_violations, 0u) << r.summary();
	EXPECT_EQ(r.n_skipped, 0u);
}

TEST(Gaps, NeumannMediaNoViolations) {
	const auto r = check_gap_bounds(random_media_suite(3, 2.0, 128, Boundary::neumann, 4), 0.5);
	EXPECT_EQ(r.n_violations, 0u) << r.summary();
}

TEST(Gaps, LargeVariationIsAHypothesisFailure) {
	const auto r = check_gap_bounds(single(step_medium(128, Boundary::dirichlet, 3.5), "step"));
	EXPECT_EQ(r.cases[0].status, CaseStatus::hypothesis_failed);
	EXPECT_EQ(r.n_violations, 0u);
	EXPECT_EQ(r.n_skipped, 1u);
}

TEST(Gaps, PeriodicIsInformational) {
	const auto r = check_gap_bounds(flat(128, Boundary::periodic));
	EXPECT_EQ(r.cases[0].status, CaseStatus::informational);
	EXPECT_EQ(r.n_violations, 0u);
}

TEST(Incoherence, FlatMediumSitsAtRootTwo) {
	const auto r = check_incoherence(flat(256, Boundary::dirichlet));
	const auto& c = r.cases[0];
	EXPECT_NEAR(c.measured, std::sqrt(2.0), 1e-2);
	EXPECT_DOUBLE_EQ(c.bound, 2.0 * std::sqrt(2.0));
	EXPECT_EQ(c.status, CaseStatus::pass);
	EXPECT_EQ(c.extra["unfaithful_modes"], 0);
}

TEST(Incoherence, SmoothHighContrastPasses) {
	const auto r = check_incoherence(single(make_smooth_medium(8, Grid(256, Boundary::neumann)), "smooth-8"));
	EXPECT_EQ(r.n_violations, 0u) << r.summary();
}

TEST(Incoherence, RandomMediaNoViolations) {
	const auto r = check_incoherence(random_media_suite(4, 2.0, 128, Boundary::dirichlet, 5));
	EXPECT_EQ(r.n_violations, 0u) << r.summary();
	EXPECT_EQ(r.n_cases, 4u);
}

TEST(L1Growth, ConstantMediumHasLargeMargin) {
	const auto r = check_l1_growth(flat(256, Boundary::dirichlet), 4, 1);
	EXPECT_EQ(r.n_violations, 0u);
	EXPECT_GT(r.worst_margin, 1.5);
}

TEST(L1Growth, RandomMediaNoViolations) {
	const auto suite = random_media_suite(3, 0.5, 256, Boundary::dirichlet, 6);
	const auto r = check_l1_growth(suite, 4, 7);
	EXPECT_EQ(r.n_cases, 12u);
	EXPECT_EQ(r.n_violations, 0u) << r.summary();
}

TEST(L1Growth, PeriodicUsesTheLargerBudget) {
	const Medium m = step_medium(128, Boundary::periodic, 0.7); // two jumps: Var = 1.4
	EXPECT_TRUE(l1_growth_hypothesis(m));
	EXPECT_NEAR(l1_growth_factor(m), 1.0 / 0.3, 1e-12);
	EXPECT_FALSE(l1_growth_hypothesis(step_medium(128, Boundary::dirichlet, 1.4)));
	EXPECT_EQ(check_l1_growth(single(m, "periodic-step"), 2, 1).n_violations, 0u);
}

TEST(L1Growth, NegativeControlIsAHypothesisFailure) {
	const auto r = check_l1_growth(single(step_medium(128, Boundary::dirichlet, 3.0), "var-3"), 3, 1);
	EXPECT_EQ(r.n_cases, 3u);
	EXPECT_EQ(r.n_skipped, 3u);
	EXPECT_EQ(r.n_violations, 0u);
	for (const auto& c : r.cases)
		EXPECT_EQ(c.status, CaseStatus::hypothesis_failed);
}

TEST(Sampling, DrawsAreDistinct) {
	auto rng = make_rng(3, "t");
	const std::vector<double> p{0.5, 0.2, 0.2, 0.05, 0.05};
	for (int t = 0; t < 200; ++t) {
		const auto d = sequential_draw(p, 4, rng);
		EXPECT_EQ(std::set<std::size_t>(d.begin(), d.end()).size(), 4u);
	}
}

TEST(Sampling, UniformInclusionIsKOverN) {
	const std::vector<double> p(10, 0.1);
	const auto r = check_sampling_proposition(p, 3, 100000, 11);
	EXPECT_EQ(r.n_violations, 0u) << r.summary();
	for (const auto& c : r.cases)
		EXPECT_NEAR(c.measured, 0.3, 0.01);
}

TEST(Sampling, NonuniformFloor) {
	const auto r = check_sampling_proposition({0.4, 0.3, 0.2, 0.1}, 2, 100000, 12);
	EXPECT_EQ(r.n_violations, 0u) << r.summary();
	for (const auto& c : r.cases) {
		EXPECT_DOUBLE_EQ(c.bound, 0.2);
		EXPECT_GE(c.measured, 0.2);
	}
	// Two draws: 0.1 + sum_j p_j 0.1/(1-p_j) for the lightest index.
	EXPECT_NEAR(r.cases[3].measured, 0.1 + 0.4 * 0.1 / 0.6 + 0.3 * 0.1 / 0.7 + 0.2 * 0.1 / 0.8, 0.005);
}

TEST(Sampling, FullDrawIncludesEverything) {
	const auto r = check_sampling_proposition({0.4, 0.3, 0.2, 0.1}, 4, 1000, 1);
	for (const auto& c : r.cases)
		EXPECT_EQ(c.measured, 1.0);
	EXPECT_EQ(r.n_violations, 0u);
}

TEST(Sampling, RejectsInvalidProbabilities) {
	EXPECT_THROW(check_sampling_proposition({0.5, 0.6}, 1, 10, 1), ParameterError);
	EXPECT_THROW(check_sampling_proposition({1.0, 0.0}, 1, 10, 1), ParameterError);
	EXPECT_THROW(check_sampling_proposition({0.5, 0.5}, 3, 10, 1), ParameterError);
	EXPECT_THROW(check_sampling_proposition({}, 1, 10, 1), ParameterError);
}

TEST(Sampling, SeededRunsRepeat) {
	const std::vector<double> p{0.4, 0.3, 0.2, 0.1};
	const auto a = check_sampling_proposition(p, 2, 5000, 8);
	const auto b = check_sampling_proposition(p, 2, 5000, 8);
	for (std::size_t i = 0; i < p.size(); ++i)
		EXPECT_EQ(a.cases[i].measured, b.cases[i].measured);
}

TEST(CSigma, FlatPeriodicIsTwo) {
	const auto e = estimate_c_sigma(flat(256, Boundary::periodic)[0].medium);
	EXPECT_NEAR(e.probability_ratio, 1.0, 1e-9);
	// Degenerate pairs come back in an arbitrary rotation, so the sampled peak
	// of the worst cosine can sit a hair below 1.
	EXPECT_NEAR(e.mu_squared, 2.0, 1e-6);
	EXPECT_NEAR(e.measured, 2.0, 1e-6);
	EXPECT_DOUBLE_EQ(e.analytic, 1.0);
	EXPECT_DOUBLE_EQ(e.bound, 8.0);
}

TEST(CSigma, SmoothMediumPasses) {
	const auto r = check_c_sigma(single(make_smooth_medium(4, Grid(256, Boundary::dirichlet)), "smooth-4"));
	EXPECT_EQ(r.n_violations, 0u) << r.summary();
	EXPECT_GT(r.cases[0].extra["probability_ratio"].get<double>(), 1.0);
}

TEST(CSigma, GateAbovePi) {
	const auto e = estimate_c_sigma(step_medium(128, Boundary::dirichlet, 3.3));
	EXPECT_FALSE(e.hypothesis);
	const auto r = check_c_sigma(single(step_medium(128, Boundary::dirichlet, 3.3), "step"));
	EXPECT_EQ(r.cases[0].status, CaseStatus::hypothesis_failed);
}
