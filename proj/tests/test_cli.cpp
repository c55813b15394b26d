#include <cmath>
#include <cstdlib>
#include <string>
#include <vector>

#include "doctest.h"
#include "helpers.hpp"
#include "infogram/tensor.hpp"
#include "json.hpp"

using namespace infogram;
using testutil::CliResult;
using testutil::run_cli;
using testutil::TempDir;

namespace {

double bits_of(const CliResult& r) {
    return nlohmann::json::parse(r.out).at("bits").get<double>();
}

std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : s) {
        if (c == sep) {
            out.push_back(cur);
            cur.clear();
        } else {
            cur += c;
        }
    }
    out.push_back(cur);
    return out;
}

std::vector<std::string> lines_of(const std::string& s) {
    std::vector<std::string> out = split(s, '\n');
    while (!out.empty() && out.back().empty()) out.pop_back();
    return out;
}

} // namespace

TEST_SUITE("cli") {

TEST_CASE("entropy of the scaled identity gram") {
    TempDir dir;
    Tensor eye({4, 4});
    for (std::size_t i = 0; i < 4; ++i) eye.at(i, i) = 1.0;
    save_tensor(eye, dir.file("eye.npy"));

    CliResult r = run_cli("entropy --input " + dir.file("eye.npy") +
                          " --alpha 2 --gram");
    REQUIRE(r.code == 0);
    CHECK(bits_of(r) == doctest::Approx(2.0).epsilon(1e-12));

    CliResult eig = run_cli("entropy --input " + dir.file("eye.npy") +
                            " --alpha 2 --method eig --gram");
    REQUIRE(eig.code == 0);
    CHECK(bits_of(eig) == doctest::Approx(2.0).epsilon(1e-10));
}

TEST_CASE("entropy methods agree on feature inputs") {
    TempDir dir;
    save_tensor(testutil::random_tensor({16, 8}, 77), dir.file("f.npy"));

    CliResult frob = run_cli("entropy --input " + dir.file("f.npy") +
                             " --alpha 2 --method frob");
    CliResult eig = run_cli("entropy --input " + dir.file("f.npy") +
                            " --alpha 2 --method eig");
    REQUIRE(frob.code == 0);
    REQUIRE(eig.code == 0);
    CHECK(std::fabs(bits_of(frob) - bits_of(eig)) < 1e-8);

    CliResult other = run_cli("entropy --input " + dir.file("f.npy") +
                              " --alpha 1.5 --method eig");
    REQUIRE(other.code == 0);
    CHECK(bits_of(other) >= bits_of(eig) - 1e-10);
}

TEST_CASE("entropy usage and data errors map to distinct exit codes") {
    TempDir dir;
    save_tensor(testutil::random_tensor({4, 3}, 78), dir.file("f.npy"));

    CHECK(run_cli("entropy --input " + dir.file("f.npy") +
                  " --alpha 3 --method frob").code == 2);
    CHECK(run_cli("entropy --input " + dir.file("f.npy") + " --alpha 1.0").code == 2);
    CHECK(run_cli("entropy --input " + dir.file("f.npy") + " --alpha 0").code == 2);
    CHECK(run_cli("entropy --input " + dir.file("f.npy") +
                  " --alpha 2 --method nope").code == 2);
    CHECK(run_cli("entropy --alpha 2").code == 2);
    CHECK(run_cli("entropy --input " + dir.file("absent.npy") + " --alpha 2").code == 3);

    save_tensor(Tensor({2, 2, 2}, {1, 2, 3, 4, 5, 6, 7, 8}), dir.file("cube.npy"));
    CHECK(run_cli("entropy --input " + dir.file("cube.npy") + " --alpha 2").code == 2);

    Tensor skew({2, 2}, {1, 0.4, 0.1, 1});
    save_tensor(skew, dir.file("skew.npy"));
    CHECK(run_cli("entropy --input " + dir.file("skew.npy") +
                  " --alpha 2 --gram").code == 3);

    Tensor with_zero_row({3, 2}, {1, 0, 0, 0, 0, 1});
    save_tensor(with_zero_row, dir.file("zr.npy"));
    CHECK(run_cli("entropy --input " + dir.file("zr.npy") + " --alpha 2").code == 3);

    testutil::write_bytes(dir.file("junk.npy"), {'j', 'u', 'n', 'k', 'j', 'u', 'n', 'k'});
    CHECK(run_cli("entropy --input " + dir.file("junk.npy") + " --alpha 2").code == 3);
}

TEST_CASE("mutual information of a file with itself matches its entropy") {
    TempDir dir;
    save_tensor(testutil::indicator_features(6, 3, 99), dir.file("ind.npy"));

    CliResult ent = run_cli("entropy --input " + dir.file("ind.npy") + " --alpha 2");
    CliResult mi = run_cli("mi --a " + dir.file("ind.npy") + " --b " +
                           dir.file("ind.npy") + " --alpha 2");
    REQUIRE(ent.code == 0);
    REQUIRE(mi.code == 0);
    CHECK(std::fabs(bits_of(mi) - bits_of(ent)) < 1e-9);
}

TEST_CASE("mutual information is symmetric and validated") {
    TempDir dir;
    save_tensor(testutil::random_tensor({6, 4}, 101), dir.file("a.npy"));
    save_tensor(testutil::random_tensor({6, 7}, 102), dir.file("b.npy"));
    save_tensor(testutil::random_tensor({5, 4}, 103), dir.file("c.npy"));

    CliResult ab = run_cli("mi --a " + dir.file("a.npy") + " --b " + dir.file("b.npy") +
                           " --alpha 2");
    CliResult ba = run_cli("mi --a " + dir.file("b.npy") + " --b " + dir.file("a.npy") +
                           " --alpha 2");
    REQUIRE(ab.code == 0);
    REQUIRE(ba.code == 0);
    CHECK(bits_of(ab) == doctest::Approx(bits_of(ba)).epsilon(1e-12));
    CHECK(bits_of(ab) >= -1e-9);

    CHECK(run_cli("mi --a " + dir.file("a.npy") + " --b " + dir.file("c.npy") +
                  " --alpha 2").code == 2);
    CHECK(run_cli("mi --a " + dir.file("a.npy") + " --alpha 2").code == 2);
}

TEST_CASE("infoloss reproduces the alignment identity on orthogonal maps") {
    TempDir dir;
    save_tensor(testutil::random_tensor({2, 3, 2}, 110), dir.file("zi.npy"));
    save_tensor(testutil::random_tensor({2, 2, 2}, 111), dir.file("zm.npy"));
    Tensor rt({2, 4});
    rt.at(0, 0) = 1.0;
    rt.at(1, 1) = 1.0;
    save_tensor(rt, dir.file("rt.npy"));
    save_tensor(rt, dir.file("rs.npy"));

    CliResult r = run_cli("infoloss --zi " + dir.file("zi.npy") + " --zm " +
                          dir.file("zm.npy") + " --rt " + dir.file("rt.npy") +
                          " --rs " + dir.file("rs.npy"));
    REQUIRE(r.code == 0);
    nlohmann::json j = nlohmann::json::parse(r.out);
    CHECK(j.at("l_d").get<double>() == doctest::Approx(-1.0).epsilon(1e-10));
    CHECK(j.at("lambda1").get<double>() == 1.0);
    CHECK(j.at("lambda2").get<double>() == 0.5);
    double l_info = 1.0 * j.at("l_r").get<double>() + 0.5 * j.at("l_d").get<double>();
    CHECK(j.at("l_info").get<double>() == doctest::Approx(l_info).epsilon(1e-12));
    CHECK(j.at("l_task").get<double>() == 0.0);
    CHECK(j.at("l_total").get<double>() ==
          doctest::Approx(j.at("l_info").get<double>()).epsilon(1e-12));
}

TEST_CASE("infoloss weight overrides and error handling") {
    TempDir dir;
    save_tensor(testutil::random_tensor({2, 3, 2}, 120), dir.file("zi.npy"));
    save_tensor(testutil::random_tensor({2, 2, 2}, 121), dir.file("zm.npy"));
    save_tensor(testutil::random_tensor({2, 4}, 122), dir.file("rt.npy"));
    save_tensor(testutil::random_tensor({2, 4}, 123), dir.file("rs.npy"));

    CliResult zero = run_cli("infoloss --zi " + dir.file("zi.npy") + " --zm " +
                             dir.file("zm.npy") + " --rt " + dir.file("rt.npy") +
                             " --rs " + dir.file("rs.npy") +
                             " --lambda1 0 --lambda2 0");
    REQUIRE(zero.code == 0);
    nlohmann::json j = nlohmann::json::parse(zero.out);
    CHECK(j.at("l_info").get<double>() == 0.0);
    CHECK(j.at("l_total").get<double>() == 0.0);
    CHECK(j.at("l_r").get<double>() != 0.0);

    save_tensor(testutil::random_tensor({1, 4}, 124), dir.file("rt1.npy"));
    save_tensor(testutil::random_tensor({1, 4}, 125), dir.file("rs1.npy"));
    save_tensor(testutil::random_tensor({1, 3, 2}, 126), dir.file("zi1.npy"));
    save_tensor(testutil::random_tensor({1, 2, 2}, 127), dir.file("zm1.npy"));
    CHECK(run_cli("infoloss --zi " + dir.file("zi1.npy") + " --zm " +
                  dir.file("zm1.npy") + " --rt " + dir.file("rt1.npy") + " --rs " +
                  dir.file("rs1.npy")).code == 3);

    save_tensor(testutil::random_tensor({3, 4}, 128), dir.file("rs3.npy"));
    CHECK(run_cli("infoloss --zi " + dir.file("zi.npy") + " --zm " +
                  dir.file("zm.npy") + " --rt " + dir.file("rt.npy") + " --rs " +
                  dir.file("rs3.npy")).code == 2);

    CHECK(run_cli("infoloss --zi " + dir.file("zi.npy") + " --zm " +
                  dir.file("zm.npy") + " --rt " + dir.file("rt.npy")).code == 2);
}

TEST_CASE("bench prints a parsable one-row csv") {
    CliResult r = run_cli("bench --n 16 --trials 2 --alpha 2");
    REQUIRE(r.code == 0);
    std::vector<std::string> rows = lines_of(r.out);
    REQUIRE(rows.size() == 2);
    CHECK(rows[0] ==
          "n,trials,alpha,frob_mean_ms,frob_stddev_ms,eig_mean_ms,eig_stddev_ms,"
          "speedup,max_abs_diff_bits");
    std::vector<std::string> f = split(rows[1], ',');
    REQUIRE(f.size() == 9);
    CHECK(f[0] == "16");
    CHECK(f[1] == "2");
    CHECK(std::strtod(f[2].c_str(), nullptr) == 2.0);
    CHECK(std::strtod(f[5].c_str(), nullptr) > 0.0);
    CHECK(std::strtod(f[7].c_str(), nullptr) > 0.0);
    CHECK(std::strtod(f[8].c_str(), nullptr) < 1e-10);

    CliResult one = run_cli("bench --n 8 --trials 1 --alpha 2");
    REQUIRE(one.code == 0);
    std::vector<std::string> g = split(lines_of(one.out)[1], ',');
    CHECK(std::strtod(g[4].c_str(), nullptr) == 0.0);
    CHECK(std::strtod(g[6].c_str(), nullptr) == 0.0);

    CliResult off = run_cli("bench --n 8 --trials 1 --alpha 3");
    REQUIRE(off.code == 0);
    std::vector<std::string> h = split(lines_of(off.out)[1], ',');
    REQUIRE(h.size() == 9);
    CHECK(h[8].empty()); // no cross-path agreement away from order 2

    CHECK(run_cli("bench --n 1 --trials 2").code == 2);
}

TEST_CASE("train writes a deterministic report and summary") {
    TempDir dir;
    testutil::write_bytes(dir.file("cfg.json"),
                          [] {
                              std::string s = R"({"steps": 4, "batch": 3, "masks": 2,
                                                  "positions": 4, "dim": 4})";
                              return std::vector<char>(s.begin(), s.end());
                          }());

    CliResult r1 = run_cli("train --config " + dir.file("cfg.json") + " --out " +
                           dir.file("r1.csv"));
    REQUIRE(r1.code == 0);
    nlohmann::json summary = nlohmann::json::parse(r1.out);
    CHECK(summary.at("steps").get<std::size_t>() == 4);
    CHECK(std::isfinite(summary.at("first_l_total").get<double>()));
    CHECK(std::isfinite(summary.at("last_l_total").get<double>()));
    CHECK(summary.at("first_mi_ts").get<double>() >= -1e-9);
    CHECK(summary.at("last_mi_ts").get<double>() >= -1e-9);

    CliResult r2 = run_cli("train --config " + dir.file("cfg.json") + " --out " +
                           dir.file("r2.csv"));
    REQUIRE(r2.code == 0);
    CHECK(r1.out == r2.out);
    CHECK(testutil::read_bytes(dir.file("r1.csv")) ==
          testutil::read_bytes(dir.file("r2.csv")));

    std::vector<char> csv = testutil::read_bytes(dir.file("r1.csv"));
    std::string head(csv.begin(), csv.begin() + 37);
    CHECK(head == "step,lr,l_r,l_d,l_task,l_total,mi_ts\n");
}

TEST_CASE("train error handling") {
    TempDir dir;
    CHECK(run_cli("train --config " + dir.file("absent.json") + " --out " +
                  dir.file("r.csv")).code == 3);

    testutil::write_bytes(dir.file("bad.json"), {'{', 'o', 'o', 'p', 's'});
    CHECK(run_cli("train --config " + dir.file("bad.json") + " --out " +
                  dir.file("r.csv")).code == 2);

    std::string invalid = R"({"batch": 1})";
    testutil::write_bytes(dir.file("invalid.json"),
                          std::vector<char>(invalid.begin(), invalid.end()));
    CHECK(run_cli("train --config " + dir.file("invalid.json") + " --out " +
                  dir.file("r.csv")).code == 2);

    std::string ok = R"({"steps": 1, "batch": 2, "masks": 2, "positions": 3, "dim": 4})";
    testutil::write_bytes(dir.file("ok.json"), std::vector<char>(ok.begin(), ok.end()));
    CHECK(run_cli("train --config " + dir.file("ok.json") + " --out " +
                  dir.file("nodir/r.csv")).code == 3);
    CHECK(run_cli("train --config " + dir.file("ok.json")).code == 2);
}

TEST_CASE("gradcheck reports per-group errors and a failure exit on corruption") {
    CliResult r = run_cli("gradcheck --seed 0");
    REQUIRE(r.code == 0);
    std::vector<std::string> rows = lines_of(r.out);
    REQUIRE(rows.size() == 22);
    CHECK(rows[0] == "group,max_rel_error");
    for (std::size_t i = 1; i < rows.size(); ++i) {
        std::vector<std::string> f = split(rows[i], ',');
        REQUIRE(f.size() == 2);
        CHECK(f[0].find('/') != std::string::npos);
        CHECK(std::strtod(f[1].c_str(), nullptr) < 1e-4);
    }

    CliResult corrupted = run_cli("gradcheck --seed 0 --corrupt-gradient");
    CHECK(corrupted.code == 1);
}

TEST_CASE("top-level usage errors") {
    CHECK(run_cli("").code == 2);
    CHECK(run_cli("frobnicate").code == 2);
    CHECK(run_cli("entropy --input x.npy --alpha 2 --bogus").code == 2);
    CHECK(run_cli("--help").code == 0);
    CHECK(run_cli("entropy --help").code == 0);
}

} // TEST_SUITE
