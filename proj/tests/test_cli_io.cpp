#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <sys/wait.h>

#include "homog/config.hpp"
#include "homog/io.hpp"

using namespace homog;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string &name) {
    fs::path p = fs::temp_directory_path() / ("homog_cli_test_" + std::to_string(::getpid())) / name;
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

int homog_cli(const std::string &args) {
    std::string cmd = std::string(HOMOG_CLI) + " " + args + " > /dev/null 2>&1";
    int rc = std::system(cmd.c_str());
    return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

fs::path write_config(const fs::path &dir, const json &j) {
    fs::path p = dir / "config.json";
    write_json(p, j);
    return p;
}

std::string slurp(const fs::path &p) {
    std::ifstream in(p);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::vector<std::vector<double>> read_csv(const fs::path &p, std::vector<std::string> &header) {
    std::ifstream in(p);
    std::string line;
    std::getline(in, line);
    std::stringstream hs(line);
    for (std::string c; std::getline(hs, c, ',');) header.push_back(c);
    std::vector<std::vector<double>> rows;
    while (std::getline(in, line)) {
        std::stringstream ls(line);
        std::vector<double> r;
        for (std::string c; std::getline(ls, c, ',');) r.push_back(std::stod(c));
        rows.push_back(r);
    }
    return rows;
}

const json closed_form_rod{{"kernel", {{"source", "closed_form"}}},
                    {"macro", {{"dim", 1}, {"nx", 16}, {"dt", 0.01}, {"t_final", 2.0}, {"store_every", 10},
                               {"u0", {{"type", "sine"}, {"amplitude", 1.0}}}}}};

} // namespace

TEST_CASE("config parsing and validation") {
    RunConfig c = config_from_json(json::object());
    CHECK(c.radius == 0.25);
    CHECK_THROWS_AS(config_from_json(json{{"cell", {{"radius", 0.2}, {"colour", 1}}}}), Error);
    CHECK_THROWS_AS(config_from_json(json{{"cell", {{"radius", "big"}}}}), Error);
    RunConfig bad = config_from_json(json{{"cell", {{"mu", -1.0}}}});
    CHECK_THROWS_AS(validate(bad), Error);
    RunConfig geo = config_from_json(json{{"cell", {{"radius", 0.6}}}});
    try {
        validate(geo);
        FAIL("expected a geometry error");
    } catch (const Error &e) {
        CHECK(e.kind() == ErrorKind::Geometry);
    }
    RunConfig r = config_from_json(json{{"cell", {{"A", {{3, 1, 0}, {1, 3, 0}, {0, 0, 2}}}}}, {"seed", 9}});
    CHECK(r.solid_tensor()(0, 1) == 1.0);
    CHECK(r.seed == 9);
    CHECK(config_to_json(config_from_json(config_to_json(r))) == config_to_json(r));
    CHECK_THROWS_AS(load_config(fs::path("/nonexistent/config.json")), Error);
}

TEST_CASE("serialization round trips are exact") {
    Tensor4 t(2, (Eigen::Matrix3d() << 1.0 / 3.0, 0.1, 0, 0.1, 2e-17, 0, 0, 0, M_PI).finished());
    Tensor4 back = tensor_from_json(json::parse(canonical_dump(tensor_to_json(t))));
    CHECK((back.matrix() - t.matrix()).norm() == 0.0);

    PronyKernel k;
    k.A_h = t;
    k.terms = {{0.7, t * -1.0}};
    k.source = "test";
    json j = prony_to_json(k);
    CHECK(canonical_dump(prony_to_json(prony_from_json(j))) == canonical_dump(j));
    CHECK_THROWS_AS(prony_from_json(json{{"kind", "kernel_samples"}}), Error);
    CHECK(number(std::nan("")).is_null());
    CHECK(csv_number(0.1) == "0.10000000000000001");
}

TEST_CASE("cell command: invalid geometry exits with 2") {
    fs::path d = scratch("geometry");
    CHECK(homog_cli("cell --config " + write_config(d, json{{"cell", {{"radius", 0.6}}}}).string() + " --out " +
                    (d / "out").string()) == 2);
}

TEST_CASE("cell command: artifacts and byte-identical reruns") {
    fs::path d = scratch("cell");
    fs::path cfg = write_config(d, json{{"cell", {{"h", 0.1}}}});
    REQUIRE(homog_cli("cell --config " + cfg.string() + " --out " + (d / "a").string() + " --mesh-out " +
                      (d / "mesh_copy.json").string()) == 0);
    REQUIRE(homog_cli("cell --config " + cfg.string() + " --out " + (d / "b").string()) == 0);
    for (const char *f : {"mesh.json", "effective_tensor.json", "kernel_samples.json", "R_table.json"}) {
        REQUIRE(fs::exists(d / "a" / f));
        CHECK(slurp(d / "a" / f) == slurp(d / "b" / f));
    }
    CHECK(fs::exists(d / "a" / "manifest.json"));
    CHECK(slurp(d / "mesh_copy.json") == slurp(d / "a" / "mesh.json"));
    // Reusing the stored mesh reproduces the kernel.
    REQUIRE(homog_cli("cell --config " + cfg.string() + " --out " + (d / "c").string() + " --mesh-in " +
                      (d / "mesh_copy.json").string()) == 0);
    CHECK(slurp(d / "c" / "kernel_samples.json") == slurp(d / "a" / "kernel_samples.json"));

    // Kernel stage on the cell samples passes.
    CHECK(homog_cli("kernel --config " + cfg.string() + " --out " + (d / "a").string()) == 0);
    json p = read_json(d / "a" / "passivity.json");
    CHECK(p["pass"].get<bool>());
    CHECK(p["xi_count"].get<int>() == 23);

    CHECK(homog_cli("export --out " + (d / "a").string()) == 0);
    CHECK(fs::exists(d / "a" / "kernel_samples.csv"));
    CHECK(fs::exists(d / "a" / "prony_kernel.csv"));

    CHECK(homog_cli("verify --config " + cfg.string() + " --out " + (d / "a").string() + " --only decay") == 0);
    json v = read_json(d / "a" / "verification.json");
    for (const auto &c : v["checks"]) CHECK(c["group"] == "decay");

    // Hand-broken symmetry is caught.
    json s = read_json(d / "a" / "kernel_samples.json");
    s["S"][3]["packed"][0][1] = s["S"][3]["packed"][0][1].get<double>() + 1e-3;
    write_json(d / "a" / "kernel_samples.json", s);
    CHECK(homog_cli("verify --config " + cfg.string() + " --out " + (d / "a").string() + " --only decay") == 3);
    CHECK(homog_cli("verify --config " + cfg.string() + " --out " + (d / "a").string() + " --only nothing") == 2);
}

TEST_CASE("kernel command on the closed-form kernel") {
    fs::path d = scratch("closed_form");
    CHECK(homog_cli("kernel --config " + write_config(d, closed_form_rod).string() + " --out " + (d / "out").string()) == 0);
    json bad = closed_form_rod;
    bad["kernel"]["closed_form"] = {{"A_h", {{1, 0, 0}, {0, 1, 0}, {0, 0, 1}}}, {"B", {{3, 0, 0}, {0, 3, 0}, {0, 0, 3}}}, {"gamma", 1.0}};
    CHECK(homog_cli("kernel --config " + write_config(d, bad).string() + " --out " + (d / "bad").string()) == 3);
    CHECK(homog_cli("kernel --out " + (d / "empty").string()) == 2);
}

TEST_CASE("macro command") {
    fs::path d = scratch("macro");
    fs::path cfg = write_config(d, closed_form_rod);
    fs::path out = d / "out";
    CHECK(homog_cli("macro --config " + cfg.string() + " --out " + out.string()) == 2);
    REQUIRE(homog_cli("kernel --config " + cfg.string() + " --out " + out.string()) == 0);
    REQUIRE(homog_cli("macro --config " + cfg.string() + " --out " + out.string()) == 0);
    std::vector<std::string> h;
    auto rows = read_csv(out / "energy.csv", h);
    REQUIRE(h.back() == "total");
    REQUIRE(rows.size() == 201);
    for (size_t i = 1; i < rows.size(); ++i) CHECK(rows[i].back() <= rows[i - 1].back() * (1 + 1e-12));
    std::vector<std::string> th;
    auto traj = read_csv(out / "trajectory.csv", th);
    CHECK(th == std::vector<std::string>{"t", "node", "x", "u"});
    CHECK(read_json(out / "macro_summary.json")["max_displacement"].get<double>() > 0.5);

    json zero = closed_form_rod;
    zero["macro"].erase("u0");
    REQUIRE(homog_cli("macro --config " + write_config(d, zero).string() + " --out " + out.string()) == 0);
    std::vector<std::string> zh;
    for (const auto &r : read_csv(out / "trajectory.csv", zh)) CHECK(r.back() == 0.0);
}
