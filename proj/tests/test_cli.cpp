#include <catch2/catch_amalgamated.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <diffsym/diffsym.hpp>

using namespace diffsym;

namespace {

struct RunResult {
    int code;
    std::string out;
    std::string err;
    Json json;
};

RunResult run(std::vector<std::string> args) {
    std::ostringstream out, err;
    int code = run_cli(args, out, err);
    RunResult r{code, out.str(), err.str(), Json()};
    if (!r.out.empty()) r.json = Json::parse(r.out);
    return r;
}

std::string models_dir() { return DIFFSYM_MODELS_DIR; }
std::string bm() { return models_dir() + "/bm.json"; }
std::string ou() { return models_dir() + "/ou.json"; }
std::string bm2d() { return models_dir() + "/bm2d.json"; }

// writes a throwaway model under the ctest working directory
std::string temp_model(const std::string& tag, const std::string& body) {
    std::string path = "cli_tmp_" + tag + ".json";
    std::ofstream f(path);
    f << body;
    return path;
}

}  // namespace

TEST_CASE("cli validates the shipped models") {
    for (const std::string& m : {bm(), ou(), bm2d()}) {
        RunResult r = run({"validate", "--model", m, "--no-meta"});
        INFO(m << "\n" << r.out);
        CHECK(r.code == 0);
        CHECK(r.json["valid"] == true);
        CHECK(r.json["diagnostics"].empty());
        CHECK(r.json["schema_version"] == 1);
        CHECK(r.json["command"] == "validate");
    }
}

TEST_CASE("cli validate rejects broken models with diagnostics") {
    SECTION("time-dependent tau in a field") {
        std::string p = temp_model("badtau", R"json({
            "coordinates": {"spatial": ["x"]},
            "diffusor": {"a": [["1"]], "b": ["0"]},
            "fields": {"bad": {"phi": ["1"], "tau": "x*t"}}
        })json");
        RunResult r = run({"validate", "--model", p, "--no-meta"});
        CHECK(r.code == 2);
        CHECK(r.json["valid"] == false);
        REQUIRE(r.json["diagnostics"].size() == 1);
        std::string d = r.json["diagnostics"][0];
        CHECK(d.find("tau depends on spatial variable") != std::string::npos);
        std::remove(p.c_str());
    }

    SECTION("negative diffusion block") {
        std::string p = temp_model("negdiff", R"json({
            "coordinates": {"spatial": ["x"]},
            "diffusor": {"a": [["-1"]], "b": ["0"]}
        })json");
        RunResult r = run({"validate", "--model", p, "--no-meta"});
        CHECK(r.code == 2);
        std::string d = r.json["diagnostics"][0];
        CHECK(d.find("not PSD at probe points") != std::string::npos);
        std::remove(p.c_str());
    }

    SECTION("sde block inconsistent with the operator") {
        std::string p = temp_model("sdemismatch", R"json({
            "coordinates": {"spatial": ["x"]},
            "diffusor": {"a": [["1"]], "b": ["0"]},
            "sde": {"mu": ["0"], "sigma": [["1"]]}
        })json");
        RunResult r = run({"validate", "--model", p, "--no-meta"});
        CHECK(r.code == 2);
        std::string d = r.json["diagnostics"][0];
        CHECK(d.find("sde block disagrees") != std::string::npos);
        std::remove(p.c_str());
    }

    SECTION("malformed json") {
        std::string p = temp_model("mangled", "{\"coordinates\": [");
        RunResult r = run({"validate", "--model", p, "--no-meta"});
        CHECK(r.code == 2);
        CHECK(r.json["valid"] == false);
        std::string d = r.json["diagnostics"][0];
        CHECK(d.find("invalid JSON") != std::string::npos);
        std::remove(p.c_str());
    }

    SECTION("missing file") {
        RunResult r = run({"validate", "--model", "no_such_model.json", "--no-meta"});
        CHECK(r.code == 2);
        std::string d = r.json["diagnostics"][0];
        CHECK(d.find("cannot open") != std::string::npos);
    }
}

TEST_CASE("cli check reports the determining residuals") {
    SECTION("scaling passes with the expected factor") {
        RunResult r = run({"check", "--model", bm(), "--field", "scaling", "--no-meta"});
        CHECK(r.code == 0);
        CHECK(r.json["is_symmetry"] == true);
        CHECK(r.json["mu"] == "-2");
        CHECK(r.json["probabilistic"] == false);
    }

    SECTION("boost fails with a bare drift residual") {
        RunResult r = run({"check", "--model", bm(), "--field", "boost", "--no-meta"});
        CHECK(r.code == 1);
        CHECK(r.json["is_symmetry"] == false);
        REQUIRE(r.json["residuals"].size() == 2);
        CHECK(r.json["residuals"][0] == "0");
        CHECK(r.json["residuals"][1] == "-1");
    }

    SECTION("rotation of the planar model passes") {
        RunResult r = run({"check", "--model", bm2d(), "--field", "rotation", "--no-meta"});
        CHECK(r.code == 0);
        CHECK(r.json["is_symmetry"] == true);
        CHECK(r.json["mu"] == "0");
    }

    SECTION("unknown field and missing flag are usage errors") {
        RunResult r1 = run({"check", "--model", bm(), "--field", "warp", "--no-meta"});
        CHECK(r1.code == 2);
        CHECK(std::string(r1.json["error"]).find("unknown field") != std::string::npos);
        RunResult r2 = run({"check", "--model", bm(), "--no-meta"});
        CHECK(r2.code == 2);
        CHECK(std::string(r2.json["error"]).find("--field") != std::string::npos);
    }
}

TEST_CASE("cli find solves the ansatz search") {
    SECTION("heat operator quadratic ansatz") {
        RunResult r = run({"find", "--model", bm(), "--basis", "quadratic", "--no-meta"});
        CHECK(r.code == 0);
        CHECK(r.json["dimension"] == 3);
        REQUIRE(r.json["generators"].size() == 3);
        bool has_scaling = false;
        for (const auto& g : r.json["generators"])
            if (g["tau"] == "2*t") has_scaling = true;
        CHECK(has_scaling);
    }

    SECTION("mean-reverting exponential ansatz") {
        RunResult r = run({"find", "--model", ou(), "--basis", "exponential", "--no-meta"});
        CHECK(r.code == 0);
        CHECK(r.json["dimension"] == 3);
    }

    SECTION("basis that does not close is rejected with the offending term") {
        std::string p = temp_model("logbasis", R"json({
            "coordinates": {"spatial": ["x"]},
            "diffusor": {"a": [["x^2"]], "b": ["0"]},
            "bases": {"log": {"spatial": ["log(x)"], "temporal": ["1"]}}
        })json");
        RunResult r = run({"find", "--model", p, "--basis", "log", "--no-meta"});
        CHECK(r.code == 2);
        CHECK(std::string(r.json["error"]).find("log") != std::string::npos);
        std::remove(p.c_str());
    }

    SECTION("unknown basis is an error") {
        RunResult r = run({"find", "--model", bm(), "--basis", "nope", "--no-meta"});
        CHECK(r.code == 2);
    }
}

TEST_CASE("cli verify runs the sampling route") {
    SECTION("scaling passes") {
        RunResult r = run({"verify", "--model", bm(), "--field", "scaling", "--n", "800", "--dt",
                           "0.025", "--no-meta"});
        INFO(r.out);
        CHECK(r.code == 0);
        CHECK(r.json["pass"] == true);
        CHECK(r.json["n_paths"] == 800);
        CHECK(r.json["reports"].size() == 2);
        for (const auto& rep : r.json["reports"]) {
            CHECK(rep["pass"] == true);
            CHECK(rep["n_paths"] == 800);
            CHECK(!rep["entries"].empty());
        }
    }

    SECTION("boost fails") {
        RunResult r = run({"verify", "--model", bm(), "--field", "boost", "--n", "1500", "--dt",
                           "0.02", "--no-meta"});
        INFO(r.out);
        CHECK(r.code == 1);
        CHECK(r.json["pass"] == false);
        CHECK(double(r.json["max_abs_z"]) > 4.0);
    }

    SECTION("identical invocations give byte-identical reports") {
        std::vector<std::string> args = {"verify", "--model", bm(),    "--field", "scaling",
                                         "--n",    "400",     "--dt",  "0.05",    "--seed",
                                         "77",     "--no-meta"};
        RunResult a = run(args), b = run(args);
        CHECK(a.out == b.out);
        CHECK(a.code == b.code);
    }

    SECTION("seed changes the draw") {
        RunResult a = run({"verify", "--model", bm(), "--field", "scaling", "--n", "400", "--dt",
                           "0.05", "--seed", "1", "--no-meta"});
        RunResult b = run({"verify", "--model", bm(), "--field", "scaling", "--n", "400", "--dt",
                           "0.05", "--seed", "2", "--no-meta"});
        CHECK(a.out != b.out);
    }

    SECTION("bad sampling parameters are usage errors") {
        RunResult r1 = run({"verify", "--model", bm(), "--field", "scaling", "--dt", "-0.5",
                            "--no-meta"});
        CHECK(r1.code == 2);
        CHECK(std::string(r1.json["error"]).find("dt must be positive") != std::string::npos);
        RunResult r2 = run({"verify", "--model", bm(), "--field", "scaling", "--dt", "0.9",
                            "--no-meta"});
        CHECK(r2.code == 2);
        RunResult r3 = run({"verify", "--model", bm(), "--field", "scaling", "--n", "50",
                            "--no-meta"});
        CHECK(r3.code == 2);
        RunResult r4 = run({"verify", "--model", bm(), "--field", "scaling", "--n", "abc",
                            "--no-meta"});
        CHECK(r4.code == 2);
    }
}

TEST_CASE("cli compare separates the three symmetry notions") {
    SECTION("plain shift satisfies all of them") {
        RunResult r = run({"compare", "--model", bm(), "--transformation", "shift", "--no-meta"});
        INFO(r.out);
        CHECK(r.code == 0);
        CHECK(r.json["martingale"] == true);
        CHECK(r.json["sde"] == true);
        CHECK(r.json["kolmogorov"]["pde"] == true);
        CHECK(r.json["kolmogorov"]["martingale"] == true);
        CHECK(r.json["bridge_consistent"] == true);
    }

    SECTION("galilean candidate is a pde symmetry only") {
        RunResult r =
            run({"compare", "--model", bm(), "--transformation", "galilean", "--no-meta"});
        INFO(r.out);
        CHECK(r.code == 1);
        CHECK(r.json["martingale"] == false);
        CHECK(r.json["sde"].is_null());
        CHECK(r.json["kolmogorov"]["pde"] == true);
        CHECK(r.json["kolmogorov"]["martingale"] == false);
    }

    SECTION("planar rotation needs its orthogonal part on the sde level") {
        RunResult with = run(
            {"compare", "--model", bm2d(), "--transformation", "rotation", "--no-meta"});
        CHECK(with.code == 0);
        CHECK(with.json["sde"] == true);
        RunResult without = run(
            {"compare", "--model", bm2d(), "--transformation", "frozen-rotation", "--no-meta"});
        CHECK(without.code == 1);
        CHECK(without.json["sde"] == false);
        CHECK(without.json["martingale"] == true);
        CHECK(without.json["bridge_consistent"] == true);
    }

    SECTION("compare needs an sde block") {
        std::string p = temp_model("nosde", R"json({
            "coordinates": {"spatial": ["x"]},
            "diffusor": {"a": [["1"]], "b": ["0"]},
            "candidates": {"shift": {"phi": ["1"], "tau": "0"}}
        })json");
        RunResult r = run({"compare", "--model", p, "--transformation", "shift", "--no-meta"});
        CHECK(r.code == 2);
        CHECK(std::string(r.json["error"]).find("sde") != std::string::npos);
        std::remove(p.c_str());
    }

    SECTION("unknown candidate is an error") {
        RunResult r = run({"compare", "--model", bm(), "--transformation", "warp", "--no-meta"});
        CHECK(r.code == 2);
    }
}

TEST_CASE("cli report plumbing") {
    SECTION("default reports carry a timestamp, --no-meta strips it") {
        RunResult with = run({"check", "--model", bm(), "--field", "scaling"});
        CHECK(with.json.contains("meta"));
        CHECK(with.json["meta"].contains("generated_at"));
        RunResult without = run({"check", "--model", bm(), "--field", "scaling", "--no-meta"});
        CHECK(!without.json.contains("meta"));
    }

    SECTION("json-out routes the report to a file and keeps stdout quiet") {
        std::string path = "cli_tmp_out.json";
        RunResult r = run({"check", "--model", bm(), "--field", "scaling", "--no-meta",
                           "--json-out", path});
        CHECK(r.code == 0);
        CHECK(r.out.empty());
        std::ifstream f(path);
        REQUIRE(f.good());
        Json j = Json::parse(f);
        CHECK(j["mu"] == "-2");
        std::remove(path.c_str());
    }

    SECTION("flag without value and stray positional are usage errors") {
        CHECK(run({"check", "--model"}).code == 2);
        CHECK(run({"check", "stray", "--model", bm()}).code == 2);
        CHECK(run({}).code == 2);
    }
}
