// Command-line harness: media, eigensets, propagation, sweeps, migration and
// the theory checks. Every data file starts with a "##" manifest block;
// wall-clock timings go to timings.csv so data files stay reproducible.

#include <cwc/eigensolver.hpp>
#include <cwc/grid_medium.hpp>
#include <cwc/propagation.hpp>
#include <cwc/rtm.hpp>
#include <cwc/theory_checks.hpp>

#include <CLI11.hpp>

#include <charconv>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using namespace cwc;

namespace {

constexpr const char* tool_version = "0.1.0";

std::uint64_t fnv1a(std::string_view s) {
	std::uint64_t h = 14695981039346656037ull;
	for (unsigned char c : s) {
		h ^= c;
		h *= 1099511628211ull;
	}
	return h;
}

/// Shortest text that reads back to the same double.
std::string shortest(double x) {
	char buf[32];
	const auto r = std::to_chars(buf, buf + sizeof buf, x);
	return std::string(buf, r.ptr);
}

/// Output directory, manifest text and timings for one invocation.
class Run {
public:
	Run(std::string command, const CLI::App& sub, std::uint64_t seed, fs::path dir)
	    : command_(std::move(command)), seed_(seed), dir_(std::move(dir)) {
		// Output location does not belong to the experiment.
		std::istringstream all(sub.config_to_str(true, false));
		for (std::string line; std::getline(all, line);)
			if (!line.empty() && line.rfind("out-dir", 0) != 0 && line.rfind("config", 0) != 0)
				config_ += line + '\n';
		fs::create_directories(dir_);
		std::ofstream m(path("manifest.txt"));
		write_manifest(m);
		m << config_;
	}

	fs::path path(const std::string& name) const { return dir_ / name; }

	void write_manifest(std::ostream& out) const {
		std::ostringstream hash;
		hash << std::hex << std::setw(16) << std::setfill('0') << fnv1a(command_ + '\n' + config_);
		out << "## cwc " << tool_version << " eigen " << EIGEN_WORLD_VERSION << '.' << EIGEN_MAJOR_VERSION << '.'
		    << EIGEN_MINOR_VERSION << '\n'
		    << "## command: " << command_ << '\n'
		    << "## seed: " << seed_ << '\n'
		    << "## config_hash: " << hash.str() << '\n';
		std::istringstream lines(config_);
		for (std::string line; std::getline(lines, line);)
			out << "## config: " << line << '\n';
	}

	std::ofstream open(const std::string& name, bool binary = false) const {
		std::ofstream out(path(name), binary ? std::ios::binary : std::ios::out);
		require(static_cast<bool>(out), "cannot write " + path(name).string());
		write_manifest(out);
		out << std::setprecision(17);
		return out;
	}

	template <class F>
	auto timed(const std::string& stage, F&& f) {
		const auto start = std::chrono::steady_clock::now();
		auto finish = [&] {
			timings_.emplace_back(stage, std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count());
		};
		if constexpr (std::is_void_v<decltype(f())>) {
			f();
			finish();
		} else {
			auto r = f();
			finish();
			return r;
		}
	}

	~Run() {
		std::ofstream t(path("timings.csv"));
		t << "stage,wall_ms\n";
		for (const auto& [stage, ms] : timings_)
			t << stage << ',' << ms << '\n';
	}

private:
	std::string command_;
	std::string config_;
	std::uint64_t seed_;
	fs::path dir_;
	std::vector<std::pair<std::string, double>> timings_;
};

struct Common {
	std::uint64_t seed = 0;
	std::string out_dir = ".";
};

void add_common(CLI::App* sub, Common& c) {
	sub->add_option("--config", "key=value file; flags given on the command line win");
	sub->add_option("--seed", c.seed, "master seed")->capture_default_str();
	sub->add_option("--out-dir", c.out_dir, "output directory")->capture_default_str();
}

struct MediumOptions {
	std::size_t n = 1024;
	std::string bc = "periodic";
	std::string kind = "smooth";
	int gamma = 1;
	double sigma_max = 0.0;
	double var_budget = 1.0;
	int jumps = 4;
	std::string file;
};

void add_medium_options(CLI::App* sub, MediumOptions& m) {
	sub->add_option("--n", m.n, "grid intervals")->capture_default_str();
	sub->add_option("--bc", m.bc, "periodic, dirichlet or neumann")->capture_default_str();
	sub->add_option("--medium", m.kind, "smooth, piecewise, random-bv, constant or file")->capture_default_str();
	sub->add_option("--gamma", m.gamma, "family index in [1,20]")->capture_default_str();
	sub->add_option("--sigma-max", m.sigma_max, "contrast parameter; 0 picks the family default")->capture_default_str();
	sub->add_option("--var-budget", m.var_budget, "random-bv: Var(log sigma) budget")->capture_default_str();
	sub->add_option("--jumps", m.jumps, "random-bv: number of jumps")->capture_default_str();
	sub->add_option("--medium-file", m.file, "medium CSV for --medium file");
}

Medium build_medium(const MediumOptions& m, std::uint64_t seed) {
	if (m.kind == "file") {
		std::ifstream in(m.file);
		require(static_cast<bool>(in), "cannot read medium file '" + m.file + "'");
		return read_medium_csv(in);
	}
	const Grid grid(m.n, parse_boundary(m.bc));
	const auto s = derive_seed(seed, "medium");
	if (m.kind == "smooth")
		return m.sigma_max > 0.0 ? make_smooth_medium(m.gamma, m.sigma_max, grid) : make_smooth_medium(m.gamma, grid);
	if (m.kind == "piecewise")
		return m.sigma_max > 0.0 ? make_piecewise_medium(m.gamma, m.sigma_max, grid, s)
		                         : make_piecewise_medium(m.gamma, grid, s);
	if (m.kind == "random-bv")
		return make_random_bv_medium(m.var_budget, m.jumps, grid, s);
	if (m.kind == "constant")
		return Medium(grid, Vector::Ones(static_cast<Eigen::Index>(grid.size())));
	throw ParameterError("unknown medium kind '" + m.kind + "'");
}

// ---------------------------------------------------------------------------

struct MediumCmd {
	Common common;
	MediumOptions medium;
};

int cmd_medium(const CLI::App& sub, const MediumCmd& o) {
	Run run("medium", sub, o.common.seed, o.common.out_dir);
	const Medium m = run.timed("build", [&] { return build_medium(o.medium, o.common.seed); });
	auto out = run.open("medium.csv");
	write_medium_csv(out, m);
	std::cout << "n=" << m.grid().n() << " bc=" << to_string(m.grid().bc()) << " var_log_sigma=" << m.var_log_sigma()
	          << " contrast=" << m.contrast() << " crossing_time=" << m.crossing_time() << '\n';
	return 0;
}

struct EigCmd {
	Common common;
	MediumOptions medium;
	double k_over_n = 1.0;
	std::string method = "dense";
	std::string format = "csv";
};

int cmd_eig(const CLI::App& sub, const EigCmd& o) {
	Run run("eig", sub, o.common.seed, o.common.out_dir);
	const Medium m = build_medium(o.medium, o.common.seed);
	const WaveOperator op(m);
	const std::size_t k = k_from_fraction(o.k_over_n, m.size());
	EigenSet set = run.timed("eigensolve", [&] {
		if (o.method == "dense") {
			if (k == m.size())
				return full_decomposition(op);
			return draw_eigenset(SpectrumResolver(op), k, derive_seed(o.common.seed, "eigenset"));
		}
		require(o.method == "shift-invert", "method must be dense or shift-invert");
		return draw_eigenset(ShiftInvertResolver(op), k, derive_seed(o.common.seed, "eigenset"));
	});
	require(o.format == "csv" || o.format == "binary", "format must be csv or binary");
	const bool binary = o.format == "binary";
	auto out = run.open(binary ? "eigenset.bin" : "eigenset.csv", binary);
	write_eigenset(out, set, binary ? VectorFormat::binary : VectorFormat::csv);
	double worst = 0.0;
	for (const auto& p : set.pairs)
		worst = std::max(worst, p.residual);
	std::cout << "k=" << set.k() << " omega_max=" << set.omega_max << " worst_residual=" << worst << '\n';
	return 0;
}

struct PropagateCmd {
	Common common;
	MediumOptions medium;
	double center = 0.5;
	double width_cells = 7.0;
	std::string shape = "gaussian";
	double time = 0.0;
	double k_over_n = 0.2;
	std::string method = "dense";
};

InitialData bump_data(const Grid& g, const std::string& shape, double center, double width_cells) {
	const double std = width_cells / static_cast<double>(g.n());
	InitialData d;
	if (shape == "gaussian")
		d.u0 = gaussian_bump(g, center, std);
	else if (shape == "ricker")
		d.u0 = ricker_bump(g, center, std);
	else
		throw ParameterError("shape must be gaussian or ricker");
	d.u1 = Vector::Zero(d.u0.size());
	return d;
}

int cmd_propagate(const CLI::App& sub, const PropagateCmd& o) {
	Run run("propagate", sub, o.common.seed, o.common.out_dir);
	const Medium m = build_medium(o.medium, o.common.seed);
	const InitialData data = bump_data(m.grid(), o.shape, o.center, o.width_cells);
	const double t = o.time > 0.0 ? o.time : m.crossing_time();
	const std::size_t k = k_from_fraction(o.k_over_n, m.size());
	const auto set_seed = derive_seed(o.common.seed, "eigenset");
	const WaveOperator op(m);

	const ReferencePropagator ref = run.timed("reference", [&] { return ReferencePropagator(m); });
	const Vector u_ref = ref.solve(data, t).u;
	const EigenSet set = run.timed("eigenset", [&] {
		if (o.method == "dense")
			return draw_eigenset(SpectrumResolver(ref.basis()), k, set_seed);
		require(o.method == "shift-invert", "method must be dense or shift-invert");
		return draw_eigenset(ShiftInvertResolver(op), k, set_seed);
	});
	const PropagationConfig cfg;
	const auto solve = run.timed("recovery", [&] { return compressive_fields(set, m, data, {t}, cfg).front(); });

	auto out = run.open("field.csv");
	out << "x,u0,u_ref,u_cs\n";
	for (std::size_t j = 0; j < m.size(); ++j) {
		const auto i = static_cast<Eigen::Index>(j);
		out << m.grid().position(j) << ',' << data.u0[i] << ',' << u_ref[i] << ',' << solve.x[i] << '\n';
	}
	const double rel = (solve.x - u_ref).norm() / u_ref.norm();
	auto sum = run.open("summary.csv");
	sum << "t,k,relative_error,iterations,converged\n"
	    << t << ',' << set.k() << ',' << rel << ',' << solve.iterations << ',' << (solve.converged ? 1 : 0) << '\n';
	std::cout << "t=" << t << " k=" << set.k() << " relative_error=" << rel << " iterations=" << solve.iterations
	          << (solve.converged ? "" : " (not converged)") << '\n';
	return 0;
}

struct SweepCmd {
	Common common;
	std::size_t n = 2048;
	std::string family = "smooth";
	std::vector<int> gammas{2, 4, 8};
	std::vector<double> k_over_n{0.05, 0.1, 0.15, 0.2, 0.25, 0.3, 0.35, 0.4, 0.45, 0.5};
	int n_t = 100;
	std::size_t trials = 10;
	double width_cells = 7.0;
	double center = 0.5;
};

int cmd_sweep(const CLI::App& sub, const SweepCmd& o) {
	Run run("sweep", sub, o.common.seed, o.common.out_dir);
	require(o.family == "smooth" || o.family == "piecewise", "family must be smooth or piecewise");
	auto scatter = run.open("sweep_scatter.csv");
	auto mean = run.open("sweep_mean.csv");
	scatter << "gamma,k_over_n,seed,err,relative\n";
	mean << "gamma,k_over_n,k,err,relative,unconverged\n";
	for (int gamma : o.gammas) {
		MediumOptions mo;
		mo.n = o.n;
		mo.bc = "periodic";
		mo.kind = o.family;
		mo.gamma = gamma;
		const Medium m = build_medium(mo, derive_seed(o.common.seed, "sweep-medium", static_cast<std::uint64_t>(gamma)));
		const InitialData data = bump_data(m.grid(), "gaussian", o.center, o.width_cells);
		const std::string tag = "gamma=" + std::to_string(gamma);
		const ReferencePropagator ref = run.timed(tag + " reference", [&] { return ReferencePropagator(m); });
		const SpectrumResolver resolver(ref.basis());
		ErrorOptions opt;
		opt.trials = o.trials;
		opt.n_t = o.n_t;
		// Cells run on a work queue; rows are written in grid order.
		const auto stats = run.timed(tag + " cells", [&] {
			return detail::parallel_map<ErrorStatistic>(o.k_over_n.size(), [&](std::size_t c) {
				ErrorOptions cell = opt;
				cell.seed = derive_seed(o.common.seed, "sweep-cell", static_cast<std::uint64_t>(gamma) * 1000 + c);
				return error_measure(resolver, ref, data, o.k_over_n[c], cell);
			});
		});
		for (std::size_t c = 0; c < stats.size(); ++c) {
			const auto& s = stats[c];
			for (std::size_t i = 0; i < s.seeds.size(); ++i)
				scatter << gamma << ',' << shortest(o.k_over_n[c]) << ',' << s.seeds[i] << ',' << s.set_err[i] << ','
				        << s.set_relative[i] << '\n';
			mean << gamma << ',' << shortest(o.k_over_n[c]) << ',' << s.k << ',' << s.err << ',' << s.relative << ','
			     << s.unconverged << '\n';
			std::cout << "gamma=" << gamma << " k/n=" << o.k_over_n[c] << " err=" << s.err << " relative=" << s.relative
			          << '\n';
		}
		scatter.flush();
		mean.flush();
	}
	return 0;
}

struct RtmCmd {
	Common common;
	RtmConfig cfg;
	std::vector<double> k_over_n{0.1, 0.2, 0.3};
	std::size_t trials = 3;
	int adjoint_nq = 0;
};

int cmd_rtm(const CLI::App& sub, const RtmCmd& o) {
	Run run("rtm", sub, o.common.seed, o.common.out_dir);
	const Medium bg = make_smooth_medium(o.cfg.gamma, sigma_max_for_ratio(std::sqrt(o.cfg.contrast_sq)),
	                                     Grid(o.cfg.n, Boundary::periodic));
	const ReferencePropagator ref0 = run.timed("reference", [&] { return ReferencePropagator(bg); });
	const RtmProblem p = run.timed("data", [&] { return make_rtm_problem(o.cfg, &ref0); });
	const MigrationImage reference = run.timed("reference image", [&] { return migrate_reference(p, ref0); });
	const SpectrumResolver resolver(ref0.basis());

	auto err = run.open("rtm_error.csv");
	err << "k_over_n,k,seed,err,relative\n";
	auto mean = run.open("rtm_mean.csv");
	mean << "k_over_n,k,err,relative,unconverged\n";
	std::vector<ErrorStatistic> stats;
	for (double f : o.k_over_n) {
		const auto s = run.timed("k/n=" + std::to_string(f), [&] {
			return rtm_error(p, resolver, reference.r_tilde, f, o.trials, derive_seed(o.common.seed, "rtm"));
		});
		for (std::size_t i = 0; i < s.seeds.size(); ++i)
			err << shortest(f) << ',' << s.k << ',' << s.seeds[i] << ',' << s.set_err[i] << ',' << s.set_relative[i] << '\n';
		mean << shortest(f) << ',' << s.k << ',' << s.err << ',' << s.relative << ',' << s.unconverged << '\n';
		err.flush();
		mean.flush();
		std::cout << "k/n=" << f << " err=" << s.err << " relative=" << s.relative << '\n';
		stats.push_back(s);
	}

	// Image from the first set of the first k/n (the full-set image when the list is empty).
	Vector image = reference.r_tilde;
	if (!stats.empty())
		image = migrate(p, resolver, stats.front().k, stats.front().seeds.front()).r_tilde;
	auto img = run.open("rtm_image.csv");
	img << "x,r_true,r_tilde_0,r_tilde\n";
	for (Eigen::Index j = 0; j < p.r.size(); ++j)
		img << bg.grid().position(static_cast<std::size_t>(j)) << ',' << p.r[j] << ',' << reference.r_tilde[j] << ','
		    << image[j] << '\n';

	if (o.adjoint_nq > 0) {
		const auto rep = run.timed("adjoint test", [&] {
			return adjoint_test(ref0, p.source, p.T, o.adjoint_nq, derive_seed(o.common.seed, "adjoint"));
		});
		auto adj = run.open("rtm_adjoint.csv");
		adj << "n_q,forward,adjoint,discrepancy\n"
		    << o.adjoint_nq << ',' << rep.forward << ',' << rep.adjoint << ',' << rep.discrepancy << '\n';
		std::cout << "adjoint discrepancy=" << rep.discrepancy << '\n';
	}
	return 0;
}

struct CheckCmd {
	Common common;
	std::vector<std::string> suites{"gaps", "incoherence", "l1", "sampling", "c-sigma"};
	std::size_t media = 20;
	std::size_t n = 512;
	std::string bc = "dirichlet";
	double gap_var = 2.0;
	double l1_var = 0.95;
	std::size_t bumps = 10;
	double modes_fraction = 0.5;
	std::size_t trials = 100000;
};

int cmd_check(const CLI::App& sub, const CheckCmd& o) {
	Run run("check", sub, o.common.seed, o.common.out_dir);
	const Boundary bc = parse_boundary(o.bc);
	auto out = run.open("check.jsonl");
	std::size_t violations = 0;
	auto emit = [&](const CheckReport& r) {
		write_json_lines(out, r);
		out.flush();
		violations += r.n_violations;
		std::cout << r.summary() << '\n';
	};
	std::vector<SuiteMedium> spectral;
	auto spectral_suite = [&]() -> const std::vector<SuiteMedium>& {
		if (spectral.empty())
			spectral = random_media_suite(o.media, o.gap_var, o.n, bc, derive_seed(o.common.seed, "spectral-media"));
		return spectral;
	};
	for (const auto& s : o.suites) {
		if (s == "gaps")
			emit(run.timed(s, [&] { return check_gap_bounds(spectral_suite(), o.modes_fraction); }));
		else if (s == "incoherence")
			emit(run.timed(s, [&] { return check_incoherence(spectral_suite()); }));
		else if (s == "c-sigma")
			emit(run.timed(s, [&] { return check_c_sigma(spectral_suite(), o.modes_fraction); }));
		else if (s == "l1")
			emit(run.timed(s, [&] {
				const auto media = random_media_suite(o.media, o.l1_var, o.n, bc, derive_seed(o.common.seed, "l1-media"));
				return check_l1_growth(media, o.bumps, derive_seed(o.common.seed, "l1-data"));
			}));
		else if (s == "sampling")
			emit(run.timed(s, [&] {
				const auto seed = derive_seed(o.common.seed, "sampling");
				CheckReport a = check_sampling_proposition(std::vector<double>(10, 0.1), 3, o.trials, seed);
				a.name = "sampling-uniform";
				emit(a);
				CheckReport b = check_sampling_proposition({0.4, 0.3, 0.2, 0.1}, 2, o.trials, seed + 1);
				b.name = "sampling-nonuniform";
				return b;
			}));
		else
			throw ParameterError("unknown suite '" + s + "'");
	}
	return violations == 0 ? 0 : 1;
}

/// Expands "--config FILE" into flags placed right after the subcommand.
/// Keys also given on the command line are dropped so the flag wins.
std::vector<std::string> expand_config(int argc, char** argv) {
	std::vector<std::string> args(argv + 1, argv + argc);
	std::string file;
	for (std::size_t i = 0; i < args.size(); ++i) {
		if (args[i] == "--config" && i + 1 < args.size())
			file = args[i + 1];
		else if (args[i].rfind("--config=", 0) == 0)
			file = args[i].substr(9);
	}
	if (file.empty() || args.empty())
		return args;
	std::ifstream in(file);
	require(static_cast<bool>(in), "cannot read config file '" + file + "'");
	auto given = [&](const std::string& key) {
		for (const auto& a : args)
			if (a == "--" + key || a.rfind("--" + key + "=", 0) == 0)
				return true;
		return false;
	};
	auto trim = [](const std::string& s) {
		const auto b = s.find_first_not_of(" \t\r"), e = s.find_last_not_of(" \t\r");
		return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
	};
	std::vector<std::string> extra;
	for (std::string line; std::getline(in, line);) {
		line = trim(line);
		if (line.empty() || line[0] == '#')
			continue;
		const auto eq = line.find('=');
		require(eq != std::string::npos, "config line without '=': " + line);
		const std::string key = trim(line.substr(0, eq));
		std::string value = trim(line.substr(eq + 1));
		for (auto [open, close] : {std::pair{'"', '"'}, std::pair{'[', ']'}})
			if (value.size() >= 2 && value.front() == open && value.back() == close)
				value = value.substr(1, value.size() - 2);
		if (!given(key))
			extra.push_back("--" + key + "=" + value);
	}
	args.insert(args.begin() + 1, extra.begin(), extra.end());
	return args;
}

} // namespace

int main(int argc, char** argv) {
	CLI::App app{"Compressive wave computation experiments"};
	app.require_subcommand(1);
	app.set_version_flag("--version", tool_version);

	MediumCmd medium;
	auto* s_medium = app.add_subcommand("medium", "generate an impedance profile");
	add_common(s_medium, medium.common);
	add_medium_options(s_medium, medium.medium);

	EigCmd eig;
	auto* s_eig = app.add_subcommand("eig", "compute an eigenset (complete or random)");
	add_common(s_eig, eig.common);
	add_medium_options(s_eig, eig.medium);
	s_eig->add_option("--k-over-n", eig.k_over_n, "fraction of the spectrum; 1 = complete")->capture_default_str();
	s_eig->add_option("--method", eig.method, "dense or shift-invert")->capture_default_str();
	s_eig->add_option("--format", eig.format, "csv or binary")->capture_default_str();

	PropagateCmd prop;
	auto* s_prop = app.add_subcommand("propagate", "compressive vs reference wavefield at one time");
	add_common(s_prop, prop.common);
	add_medium_options(s_prop, prop.medium);
	s_prop->add_option("--center", prop.center, "bump center")->capture_default_str();
	s_prop->add_option("--width-cells", prop.width_cells, "bump std in cells")->capture_default_str();
	s_prop->add_option("--shape", prop.shape, "gaussian or ricker")->capture_default_str();
	s_prop->add_option("--time", prop.time, "final time; 0 = crossing time")->capture_default_str();
	s_prop->add_option("--k-over-n", prop.k_over_n, "eigenset fraction")->capture_default_str();
	s_prop->add_option("--method", prop.method, "dense or shift-invert")->capture_default_str();

	SweepCmd sweep;
	auto* s_sweep = app.add_subcommand("sweep", "error against k/n over a family of media");
	add_common(s_sweep, sweep.common);
	s_sweep->add_option("--n", sweep.n, "grid intervals (periodic)")->capture_default_str();
	s_sweep->add_option("--family", sweep.family, "smooth or piecewise")->capture_default_str();
	s_sweep->add_option("--gammas", sweep.gammas, "family indices")->capture_default_str()->delimiter(',');
	s_sweep->add_option("--k-over-n", sweep.k_over_n, "eigenset fractions")->capture_default_str()->delimiter(',');
	s_sweep->add_option("--n-t", sweep.n_t, "time samples")->capture_default_str();
	s_sweep->add_option("--trials", sweep.trials, "random sets per cell")->capture_default_str();
	s_sweep->add_option("--width-cells", sweep.width_cells, "bump std in cells")->capture_default_str();
	s_sweep->add_option("--center", sweep.center, "bump center")->capture_default_str();

	RtmCmd rtm;
	auto* s_rtm = app.add_subcommand("rtm", "two-reflector migration, full and compressive");
	add_common(s_rtm, rtm.common);
	s_rtm->add_option("--n", rtm.cfg.n, "grid intervals (periodic)")->capture_default_str();
	s_rtm->add_option("--gamma", rtm.cfg.gamma, "background oscillations")->capture_default_str();
	s_rtm->add_option("--contrast-sq", rtm.cfg.contrast_sq, "(max/min)^2 of the background")->capture_default_str();
	s_rtm->add_option("--reflectors", rtm.cfg.reflector_centers, "reflector centers")->capture_default_str()->delimiter(',');
	s_rtm->add_option("--amplitudes", rtm.cfg.reflector_amplitudes, "reflector amplitudes")
	    ->capture_default_str()
	    ->delimiter(',');
	s_rtm->add_option("--width-cells", rtm.cfg.width_cells, "reflector and source std in cells")->capture_default_str();
	s_rtm->add_option("--source", rtm.cfg.source_center, "source center")->capture_default_str();
	s_rtm->add_option("--mute", rtm.cfg.mute_halfwidth, "direct-arrival mute half width in cells")->capture_default_str();
	s_rtm->add_option("--n-t", rtm.cfg.n_t, "snapshots; 0 = n/10")->capture_default_str();
	s_rtm->add_option("--time", rtm.cfg.final_time, "final time; 0 = crossing time")->capture_default_str();
	s_rtm->add_option("--k-over-n", rtm.k_over_n, "eigenset fractions")->capture_default_str()->delimiter(',');
	s_rtm->add_option("--trials", rtm.trials, "random sets per fraction")->capture_default_str();
	s_rtm->add_option("--adjoint-nq", rtm.adjoint_nq, "run the dot-product test with this many intervals")
	    ->capture_default_str();

	CheckCmd check;
	auto* s_check = app.add_subcommand("check", "theory checks as JSON lines");
	add_common(s_check, check.common);
	s_check->add_option("--suites", check.suites, "gaps, incoherence, l1, sampling, c-sigma")
	    ->capture_default_str()
	    ->delimiter(',');
	s_check->add_option("--media", check.media, "media per suite")->capture_default_str();
	s_check->add_option("--n", check.n, "grid intervals")->capture_default_str();
	s_check->add_option("--bc", check.bc, "dirichlet or neumann (periodic is informational)")->capture_default_str();
	s_check->add_option("--gap-var", check.gap_var, "Var(log sigma) budget for spectral suites")->capture_default_str();
	s_check->add_option("--l1-var", check.l1_var, "Var(log sigma) budget for the l1 suite")->capture_default_str();
	s_check->add_option("--bumps", check.bumps, "data per medium in the l1 suite")->capture_default_str();
	s_check->add_option("--modes-fraction", check.modes_fraction, "lowest part of the spectrum checked")
	    ->capture_default_str();
	s_check->add_option("--trials", check.trials, "sampling trials")->capture_default_str();

	try {
		auto args = expand_config(argc, argv);
		std::reverse(args.begin(), args.end());
		app.parse(args);
	} catch (const ParameterError& e) {
		std::cerr << "error: " << e.what() << '\n';
		return 1;
	} catch (const CLI::Success& e) {
		return app.exit(e);
	} catch (const CLI::ParseError& e) {
		app.exit(e);
		return 1;
	}

	try {
		if (*s_medium)
			return cmd_medium(*s_medium, medium);
		if (*s_eig)
			return cmd_eig(*s_eig, eig);
		if (*s_prop)
			return cmd_propagate(*s_prop, prop);
		if (*s_sweep)
			return cmd_sweep(*s_sweep, sweep);
		if (*s_rtm)
			return cmd_rtm(*s_rtm, rtm);
		if (*s_check)
			return cmd_check(*s_check, check);
	} catch (const ParameterError& e) {
		std::cerr << "error: " << e.what() << '\n';
		return 1;
	} catch (const NumericalError& e) {
		std::cerr << "numerical failure: " << e.what() << '\n';
		return 2;
	} catch (const std::exception& e) {
		std::cerr << "error: " << e.what() << '\n';
		return 1;
	}
	return 1;
}
