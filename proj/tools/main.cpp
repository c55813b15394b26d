#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"

#include "infogram/entropy.hpp"
#include "infogram/error.hpp"
#include "infogram/gram.hpp"
#include "infogram/losses.hpp"
#include "infogram/train.hpp"

namespace {

using namespace infogram;

// Exit codes: 0 success, 1 failed check, 2 usage or contract violation,
// 3 unusable input data.
constexpr int kExitOk = 0;
constexpr int kExitCheckFailed = 1;
constexpr int kExitUsage = 2;
constexpr int kExitBadData = 3;

std::string fmt_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

GramMatrix gram_from_file(const std::string& path, bool is_gram) {
    Tensor t = load_tensor(path);
    if (is_gram)
        return trace_normalize(gram_from_matrix(t, GramNormalization::raw));
    if (t.rank() != 2)
        throw ShapeError("features in " + path + " must be 2-d, got rank " +
                         std::to_string(t.rank()));
    return normalize_cosine(linear_gram(t));
}

int cmd_entropy(const std::string& input, double alpha, const std::string& method,
                bool is_gram) {
    EntropyOrder order(alpha);
    GramMatrix g = gram_from_file(input, is_gram);
    EntropyValue v;
    if (method == "frob") {
        if (alpha != 2.0)
            throw ContractError("method frob computes the order-2 entropy only");
        v = entropy_frob(g);
    } else if (method == "eig") {
        v = entropy_eig(g, order);
    } else {
        v = entropy(g, order);
    }
    std::cout << nlohmann::json{{"bits", v.bits}}.dump() << "\n";
    return kExitOk;
}

int cmd_mi(const std::string& a_path, const std::string& b_path, double alpha,
           bool is_gram) {
    EntropyOrder order(alpha);
    GramMatrix a = gram_from_file(a_path, is_gram);
    GramMatrix b = gram_from_file(b_path, is_gram);
    double bits = mutual_information(a, b, order);
    std::cout << nlohmann::json{{"bits", bits}}.dump() << "\n";
    return kExitOk;
}

int cmd_infoloss(const std::string& zi_path, const std::string& zm_path,
                 const std::string& rt_path, const std::string& rs_path,
                 const LossWeights& weights) {
    Tensor zi = load_tensor(zi_path);
    Tensor zm = load_tensor(zm_path);
    Tensor rt = load_tensor(rt_path);
    Tensor rs = load_tensor(rs_path);
    if (rt.rank() != 2 || rs.rank() != 2)
        throw ShapeError("relation maps must be 2-d [batch, width]");

    std::size_t b = rt.shape()[0];
    if (b < 2) {
        std::cerr << "error: need a batch of at least 2, got " << b << "\n";
        return kExitBadData;
    }
    if (rs.shape()[0] != b || zi.rank() < 2 || zm.rank() < 2 ||
        zi.shape()[0] != b || zm.shape()[0] != b)
        throw ShapeError("batch sizes of zi, zm, rt, rs differ");

    ad::Tape tape;
    RelationOutput r_t{tape.constant(l2_normalize_rows(rt)), b, 1, rt.shape()[1]};
    RelationOutput r_s{tape.constant(l2_normalize_rows(rs)), b, 1, rs.shape()[1]};
    double l_r_v = loss_r(tape, zi, zm, r_t)->value.value();
    double l_d_v = loss_d(tape, r_t, r_s)->value.value();
    std::cout << make_breakdown(l_r_v, l_d_v, 0.0, weights).to_json() << "\n";
    return kExitOk;
}

int cmd_bench(std::size_t n, std::size_t trials, double alpha) {
    PathBenchResult r = benchmark_entropy_paths(n, trials, EntropyOrder(alpha), 0);
    std::cout << "n,trials,alpha,frob_mean_ms,frob_stddev_ms,eig_mean_ms,"
                 "eig_stddev_ms,speedup,max_abs_diff_bits\n";
    std::cout << r.n << "," << r.trials << "," << fmt_double(r.alpha) << ","
              << fmt_double(r.frob_mean_ms) << "," << fmt_double(r.frob_stddev_ms)
              << "," << fmt_double(r.eig_mean_ms) << "," << fmt_double(r.eig_stddev_ms)
              << "," << fmt_double(r.speedup) << ","
              << (std::isnan(r.max_abs_diff_bits) ? std::string()
                                                  : fmt_double(r.max_abs_diff_bits))
              << "\n";
    return kExitOk;
}

int cmd_train(const std::string& config_path, const std::string& out_path) {
    TrainConfig cfg = load_train_config(config_path);
    TrainReport report = run_toy_training(cfg);
    write_report_csv(report, out_path);
    const TrainRecord& first = report.records.front();
    const TrainRecord& last = report.records.back();
    nlohmann::json summary{{"steps", report.records.size()},
                           {"first_l_total", first.l_total},
                           {"last_l_total", last.l_total},
                           {"first_mi_ts", first.mi_ts},
                           {"last_mi_ts", last.mi_ts}};
    std::cout << summary.dump() << "\n";
    return kExitOk;
}

int cmd_gradcheck(std::uint64_t seed, bool corrupt) {
    GradCheckReport report = gradcheck_all(seed);
    if (corrupt && !report.entries.empty())
        report.entries.front().max_rel_error += 1.0;
    std::cout << "group,max_rel_error\n";
    for (const GradCheckEntry& e : report.entries)
        std::cout << e.group << "," << fmt_double(e.max_rel_error) << "\n";
    if (!report.all_below(1e-4)) {
        std::cerr << "error: gradient check failed, worst relative error "
                  << fmt_double(report.worst()) << "\n";
        return kExitCheckFailed;
    }
    return kExitOk;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Gram-matrix entropy, mutual information and relation "
                 "distillation toolkit"};
    app.require_subcommand(1);
    std::function<int()> job;

    auto* entropy_cmd = app.add_subcommand(
        "entropy", "Spectral entropy of one feature or Gram matrix file");
    {
        static std::string input, method = "auto";
        static double alpha = 2.0;
        static bool is_gram = false;
        entropy_cmd->add_option("--input", input, "NPY file")->required();
        entropy_cmd->add_option("--alpha", alpha, "entropy order")->required();
        entropy_cmd->add_option("--method", method, "auto, eig or frob")
            ->check(CLI::IsMember({"auto", "eig", "frob"}));
        entropy_cmd->add_flag("--gram", is_gram,
                              "input is already a square Gram matrix");
        entropy_cmd->callback(
            [&]() { job = [&]() { return cmd_entropy(input, alpha, method, is_gram); }; });
    }

    auto* mi_cmd = app.add_subcommand(
        "mi", "Mutual information between two feature or Gram matrix files");
    {
        static std::string a, b;
        static double alpha = 2.0;
        static bool is_gram = false;
        mi_cmd->add_option("--a", a, "first NPY file")->required();
        mi_cmd->add_option("--b", b, "second NPY file")->required();
        mi_cmd->add_option("--alpha", alpha, "entropy order")->required();
        mi_cmd->add_flag("--gram", is_gram, "inputs are square Gram matrices");
        mi_cmd->callback([&]() { job = [&]() { return cmd_mi(a, b, alpha, is_gram); }; });
    }

    auto* infoloss_cmd = app.add_subcommand(
        "infoloss", "Compression and alignment losses from saved tensors");
    {
        static std::string zi, zm, rt, rs;
        static LossWeights weights;
        infoloss_cmd->add_option("--zi", zi, "key features [B,P,D]")->required();
        infoloss_cmd->add_option("--zm", zm, "query features [B,N,D]")->required();
        infoloss_cmd->add_option("--rt", rt, "reference relation map [B,W]")->required();
        infoloss_cmd->add_option("--rs", rs, "compared relation map [B,W]")->required();
        infoloss_cmd->add_option("--lambda1", weights.lambda1, "compression weight");
        infoloss_cmd->add_option("--lambda2", weights.lambda2, "alignment weight");
        infoloss_cmd->callback(
            [&]() { job = [&]() { return cmd_infoloss(zi, zm, rt, rs, weights); }; });
    }

    auto* bench_cmd = app.add_subcommand(
        "bench", "Time the Frobenius path against the eigenvalue path");
    {
        static std::size_t n = 512, trials = 20;
        static double alpha = 2.0;
        bench_cmd->add_option("--n", n, "matrix size");
        bench_cmd->add_option("--trials", trials, "number of matrices");
        bench_cmd->add_option("--alpha", alpha, "entropy order for the eig path");
        bench_cmd->callback([&]() { job = [&]() { return cmd_bench(n, trials, alpha); }; });
    }

    auto* train_cmd =
        app.add_subcommand("train", "Run the synthetic distillation loop");
    {
        static std::string config, out;
        train_cmd->add_option("--config", config, "JSON config file")->required();
        train_cmd->add_option("--out", out, "CSV report path")->required();
        train_cmd->callback([&]() { job = [&]() { return cmd_train(config, out); }; });
    }

    auto* gradcheck_cmd = app.add_subcommand(
        "gradcheck", "Compare every loss gradient against finite differences");
    {
        static std::uint64_t seed = 0;
        static bool corrupt = false;
        gradcheck_cmd->add_option("--seed", seed, "scenario seed");
        gradcheck_cmd->add_flag("--corrupt-gradient", corrupt)->group("");
        gradcheck_cmd->callback(
            [&]() { job = [&]() { return cmd_gradcheck(seed, corrupt); }; });
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitUsage;
    }

    try {
        return job();
    } catch (const ShapeError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const ContractError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const DegenerateError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitBadData;
    } catch (const FormatError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitBadData;
    } catch (const IoError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitBadData;
    } catch (const NumericError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitBadData;
    }
}
