#include "bq/errors.hpp"
#include "bq/experiments.hpp"

#include <doctest.h>
#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

using namespace bq;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

fs::path scratch_dir(const std::string& name) {
    const fs::path dir = fs::temp_directory_path() / ("bq_test_" + name);
    fs::remove_all(dir);
    return dir;
}

ExperimentConfig tiny_config() {
    return parse_config(
        "n = 8\n"
        "dt = 1e-2\n"
        "T = 0.1\n"
        "n_samples = 4\n"
        "record_count = 11\n"
        "delta_list = 1e-2, 2e-2, 4e-2, 8e-2\n"
        "moment_samples = 30\n"
        "khasminskii_samples = 3\n"
        "increment_paths = 3\n"
        "increment_lags = 1, 2, 4\n");
}

ConfigError config_error(std::string_view text) {
    try {
        parse_config(text);
    } catch (const ConfigError& e) {
        return e;
    }
    FAIL("expected a ConfigError");
    return ConfigError("", 0, "");
}

}  // namespace

TEST_CASE("empty config gives the defaults") {
    const ExperimentConfig c = parse_config("");
    CHECK(c.n == 32);
    CHECK(c.dt == 1e-3);
    CHECK(c.T == 1.0);
    CHECK(c.eps_list == std::vector<double>{1.0, 0.5, 0.25, 0.1});
    CHECK(c.n_samples == 100);
    CHECK(c.beta1 == 0.8);
    CHECK(c.beta2 == 0.6);
    CHECK_FALSE(c.c_nu1.has_value());
    CHECK(c.resolved_c_nu1() == doctest::Approx(unit_mass_constant(0.8, 1e-3)));
    CHECK(total_rate({c.beta2, c.resolved_c_nu2(), c.r_min}) == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(c.rates().feasible);
}

TEST_CASE("config parsing") {
    const ExperimentConfig c = parse_config("# comment\n eps_list = 1, 0.5 \nc_nu1 = 1\nc_nu2=unit_mass\n");
    CHECK(c.eps_list == std::vector<double>{1.0, 0.5});
    REQUIRE(c.c_nu1.has_value());
    CHECK(*c.c_nu1 == 1.0);
    CHECK_FALSE(c.c_nu2.has_value());

    const ConfigError neg = config_error("dt = -1\n");
    CHECK(neg.field() == "dt");
    CHECK(std::string(neg.what()).find("dt") != std::string::npos);

    const ConfigError unknown = config_error("n = 16\n\nbogus = 3\n");
    CHECK(unknown.line() == 3);
    CHECK(unknown.field() == "bogus");

    CHECK(config_error("n = 16\nn = 32\n").line() == 2);
    CHECK(config_error("n = 7\n").field() == "n");
    CHECK(config_error("n = 3.5\n").line() == 1);
    CHECK(config_error("eps_list = 1, 1.5\n").field() == "eps_list");
    CHECK(config_error("eps_list = 1,,0.5\n").field() == "eps_list");
    CHECK(config_error("delta_list = 1.5e-3\n").field() == "delta_list");
    CHECK(config_error("no equals sign\n").line() == 1);
    CHECK_THROWS_AS(load_config("/nonexistent/bq.cfg"), ConfigError);
}

TEST_CASE("rendered config parses back to the same config") {
    ExperimentConfig c = tiny_config();
    c.c_nu1 = 0.125;
    c.base_seed = 18446744073709551615ull;
    const std::string text = render_config(c);
    CHECK(render_config(parse_config(text)) == text);
    CHECK(parse_config(text).base_seed == c.base_seed);
}

TEST_CASE("synthetic spec parsing") {
    for (const char* s : {"mse=2*eps^0.645", "mse=2ε^0.645", " mse = 2 * eps ^ 0.645 "}) {
        const auto [c, a] = parse_synthetic(s);
        CHECK(c == 2.0);
        CHECK(a == 0.645);
    }
    CHECK_THROWS_AS(parse_synthetic("mse=eps"), ConfigError);
    CHECK_THROWS_AS(parse_synthetic("mse=-2*eps^0.5"), ConfigError);
}

TEST_CASE("synthetic convergence recovers the law exactly") {
    const ExperimentConfig c = parse_config("");
    const ConvergenceResult r = synthetic_convergence(c, 2.0, 0.645);
    REQUIRE(r.fit.has_value());
    CHECK(r.fit->coefficient == doctest::Approx(2.0).epsilon(1e-12));
    CHECK(r.fit->exponent == doctest::Approx(0.645).epsilon(1e-12));
    CHECK(r.fit->r_squared == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(r.thresholds_pass());
    CHECK_FALSE(synthetic_convergence(c, 2.0, 1.5).thresholds_pass());
    CHECK_FALSE(synthetic_convergence(c, 2.0, -0.5).mse_decreasing);
}

TEST_CASE("serial and OpenMP campaigns agree bit for bit") {
    const ExperimentConfig c = tiny_config();
    const ConvergenceResult serial = run_convergence(c, 1);
    const ConvergenceResult parallel = run_convergence(c, 4);
    REQUIRE(serial.errors.size() == parallel.errors.size());
    for (std::size_t i = 0; i < serial.errors.size(); ++i) {
        CHECK(serial.errors[i].error == parallel.errors[i].error);
        CHECK(serial.errors[i].sample == parallel.errors[i].sample);
    }
    CHECK(serial.attempted == 16);
    CHECK(serial.failures.empty());

    const MomentsResult ms = run_moments(c, 1);
    const MomentsResult mp = run_moments(c, 3);
    for (std::size_t i = 0; i < ms.reports.size(); ++i) CHECK(ms.reports[i].sup_moment == mp.reports[i].sup_moment);

    const KhasminskiiResult ks = run_khasminskii_study(c, 1);
    const KhasminskiiResult kp = run_khasminskii_study(c, 2);
    CHECK(ks.gap == kp.gap);
    CHECK(ks.gap.front() == 0.0);  // delta = dt

    const IncrementsResult is = run_increments(c, 1);
    const IncrementsResult ip = run_increments(c, 2);
    CHECK(is.report.mean_sq_increments == ip.report.mean_sq_increments);
}

TEST_CASE("per-sample errors are reproducible") {
    ExperimentConfig c = tiny_config();
    c.c_nu1 = 1.0;  // about 300 eta_1 jumps per unit time, so distinct seeds give distinct paths
    const Model m = c.model();
    CHECK(convergence_sample(c, m, 1, 2) == convergence_sample(c, m, 1, 2));
    CHECK(convergence_sample(c, m, 1, 2) != convergence_sample(c, m, 1, 3));
    CHECK(sample_seed(c.base_seed, 1, 2, 1) != sample_seed(c.base_seed, 1, 2, 2));
}

TEST_CASE("CSV output is byte-identical on rerun") {
    ExperimentConfig c = tiny_config();
    const fs::path a = scratch_dir("rerun_a"), b = scratch_dir("rerun_b");
    write_convergence_csv(a, run_convergence(c, 1));
    write_convergence_csv(b, run_convergence(c, 0));
    for (const char* f : {"errors.csv", "mse.csv", "fit.csv"}) {
        CHECK(slurp(a / f) == slurp(b / f));
        CHECK_FALSE(slurp(a / f).empty());
    }
    CHECK(slurp(a / "errors.csv").rfind("eps,sample,error\n", 0) == 0);
    CHECK(slurp(a / "mse.csv").rfind("eps,mean_error,mse,n\n", 0) == 0);
    // fit.csv is rewritten, not appended
    write_convergence_csv(a, run_convergence(c, 1));
    CHECK(slurp(a / "fit.csv") == slurp(b / "fit.csv"));
    fs::remove_all(a);
    fs::remove_all(b);
}

TEST_CASE("single eps, single sample") {
    const ExperimentConfig c = parse_config("n = 8\ndt = 1e-2\nT = 0.1\nrecord_count = 3\ndelta_list = 1e-2\neps_list = 1\nn_samples = 1\n");
    const ConvergenceResult r = run_convergence(c, 1);
    REQUIRE(r.errors.size() == 1);
    CHECK(r.errors[0].error >= 0.0);
    CHECK_FALSE(r.fit.has_value());
    CHECK_FALSE(r.thresholds_pass());
    const fs::path dir = scratch_dir("single");
    write_convergence_csv(dir, r);
    CHECK(slurp(dir / "fit.csv") == "coefficient,exponent,r_squared\n");
    std::istringstream rows(slurp(dir / "errors.csv"));
    std::string line;
    int count = 0;
    while (std::getline(rows, line)) ++count;
    CHECK(count == 2);
    fs::remove_all(dir);
}

TEST_CASE("blown-up samples are recorded and skipped") {
    const ExperimentConfig c =
        parse_config("n = 8\ndt = 1e-2\nT = 0.1\nrecord_count = 3\ndelta_list = 1e-2\nn_samples = 2\nj0_amplitude = 1e200\n");
    const ConvergenceResult r = run_convergence(c, 1);
    CHECK(r.attempted == 8);
    CHECK(r.failures.size() == 8);
    CHECK(r.failure_fraction() == 1.0);
    CHECK(r.errors.empty());
    CHECK(r.failures[0].time > 0.0);
    CHECK(r.failures[0].seed1 == sample_seed(c.base_seed, 0, 0, 1));
    CHECK(r.failures[0].message.find("blow-up") != std::string::npos);
}

TEST_CASE("manifest contents") {
    const ExperimentConfig c = tiny_config();
    ManifestInfo info;
    info.command = "convergence";
    info.workers = 1;
    info.started_at = utc_timestamp();
    info.failures.push_back({0, 1, 11, 12, 0.05, "blow-up"});
    info.attempted = 16;
    const fs::path dir = scratch_dir("manifest");
    write_manifest(dir, c, info);
    const auto m = nlohmann::json::parse(slurp(dir / "manifest.json"));
    CHECK(m["command"] == "convergence");
    CHECK(m["config"]["n"] == "8");
    CHECK(m["config"]["c_nu1"] == "unit_mass");
    CHECK(m["resolved_c_nu1"].get<double>() == doctest::Approx(unit_mass_constant(0.8, 1e-3)));
    CHECK(m["seeds"]["table"].size() == 4);
    CHECK(m["seeds"]["table"][1]["stream2"][3] == std::to_string(sample_seed(c.base_seed, 1, 3, 2)));
    CHECK(m["failed_samples"] == 1);
    CHECK(m["failures"][0]["seed_stream2"] == "12");
    CHECK(m.contains("dt_flag"));
    CHECK(m["config_text"] == render_config(c));
    CHECK(parse_config(m["config_text"].get<std::string>()).n == 8);
    fs::remove_all(dir);
}
