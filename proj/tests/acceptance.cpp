// Acceptance suite: runs every criterion end-to-end and prints one PASS/FAIL
// line each. Expects the path to the `rega` CLI binary as argv[1].

#include "rega/defaults.hpp"
#include "rega/distill.hpp"
#include "rega/eval.hpp"
#include "rega/manifest.hpp"
#include "rega/rng.hpp"
#include "rega/strategy.hpp"
#include "rega/toy.hpp"

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <json.hpp>
#include <sstream>

namespace fs = std::filesystem;
using nlohmann::json;
using namespace rega;

namespace {

int g_failures = 0;

void criterion(int number, const std::string& name, bool ok,
               const std::string& detail = "") {
    std::cout << (ok ? "PASS" : "FAIL") << " criterion " << number << ": " << name;
    if (!detail.empty()) std::cout << " [" << detail << "]";
    std::cout << '\n';
    if (!ok) ++g_failures;
}

double elapsed_s(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string q(const fs::path& p) { return "\"" + p.string() + "\""; }

int run_cli(const std::string& cli, const std::string& args, const fs::path& log) {
    const std::string cmd = q(cli) + " " + args + " > " + q(log) + " 2>&1";
    return std::system(cmd.c_str());
}

void write_standin_file(const fs::path& path, const std::string& domain,
                        const std::vector<std::pair<std::string, std::size_t>>& subs) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    for (const auto& [sub, n] : subs) {
        for (std::size_t i = 0; i < n; ++i) {
            out << R"({"id": ")" << domain << '/' << sub << '/' << i
                << R"(", "instruction": "q )" << i << R"(", "response": "r", "domain": ")"
                << domain << '"';
            if (!sub.empty()) out << R"(, "sub_dataset": ")" << sub << '"';
            out << "}\n";
        }
    }
}

json read_json_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    json j;
    in >> j;
    return j;
}

std::size_t count_lines(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    std::size_t n = 0;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty()) ++n;
    }
    return n;
}

double median(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const auto n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

} // namespace

int main(int argc, char** argv) {
    if (argc < 2) {
        std::cerr << "usage: acceptance_tests <path-to-rega-cli>\n";
        return 2;
    }
    const std::string cli = argv[1];
    const fs::path work = fs::temp_directory_path() / "rega_acceptance";
    fs::remove_all(work);
    fs::create_directories(work);

    // ----------------------------------------------------------------- data
    // Synthetic stand-ins at the Chinese-corpus training sizes.
    const fs::path med = work / "medicine.jsonl";
    const fs::path law = work / "law.jsonl";
    const fs::path fin = work / "finance.jsonl";
    const fs::path general = work / "general.jsonl";
    write_standin_file(med, "medicine",
                       {{"cMedQQ", 14500}, {"cMedTC", 14110}, {"cMedQA", 28914}});
    write_standin_file(law, "law", {{"LawQA", 4372}, {"LawSum", 5235}});
    write_standin_file(fin, "finance",
                       {{"FNA", 5000},
                        {"FQA", 5000},
                        {"FNL", 5000},
                        {"FRE", 5000},
                        {"FFE", 5000},
                        {"FSP", 4000}});
    write_standin_file(general, "general", {{"", 100000}});

    const std::string domain_args =
        " --domains " + q(med) + " --domains " + q(law) + " --domains " + q(fin);

    // ------------------------------------------------------- criterion 1
    {
        const auto t0 = std::chrono::steady_clock::now();
        const fs::path out = work / "rega_corpus.jsonl";
        const int rc = run_cli(cli,
                               "compile --strategy rega" + domain_args + " --general " +
                                   q(general) + " --mixing-ratio 0.1 --seed 17 --out " +
                                   q(out),
                               work / "c1.log");
        const double secs = elapsed_s(t0);
        bool ok = rc == 0;
        std::string detail = "rc=" + std::to_string(rc);
        if (ok) {
            const auto stats = read_json_file(fs::path(out.string() + ".stats.json"));
            const auto total = stats.at("total").get<std::size_t>();
            const auto dups = stats.at("duplicates").get<std::size_t>();
            const auto& comp = stats.at("composition");
            const auto med_sub = comp.at("medicine").at("central").get<std::size_t>();
            const auto law_sub = comp.at("law").at("central").get<std::size_t>();
            const auto fin_sub = comp.at("finance").at("central").get<std::size_t>();
            const auto lines = count_lines(out);
            ok = total == 205743 && lines == 205743 && med_sub == 5752 &&
                 law_sub == 960 && fin_sub == 2900 && dups == 9612 && secs < 30.0;
            detail = "total=" + std::to_string(total) + " subsets=" +
                     std::to_string(med_sub) + "/" + std::to_string(law_sub) + "/" +
                     std::to_string(fin_sub) + " dups=" + std::to_string(dups) +
                     " time=" + std::to_string(secs).substr(0, 4) + "s";
        }
        criterion(1, "REGA corpus composition at paper scale", ok, detail);
    }

    // ------------------------------------------------------- criterion 2
    {
        bool ok = true;
        std::string detail;

        const fs::path ft_out = work / "ft_corpus.jsonl";
        ok &= run_cli(cli,
                      "compile --strategy ft" + domain_args + " --seed 17 --out " +
                          q(ft_out),
                      work / "c2_ft.log") == 0;
        const auto ft_total =
            read_json_file(fs::path(ft_out.string() + ".stats.json")).at("total")
                .get<std::size_t>();
        ok &= ft_total == 96131;
        detail += "ft=" + std::to_string(ft_total);

        const fs::path ftsd_out = work / "ftsd_corpus.jsonl";
        ok &= run_cli(cli,
                      "compile --strategy ftsd" + domain_args + " --general " +
                          q(general) + " --seed 17 --out " + q(ftsd_out),
                      work / "c2_ftsd.log") == 0;
        const auto ftsd_total =
            read_json_file(fs::path(ftsd_out.string() + ".stats.json")).at("total")
                .get<std::size_t>();
        ok &= ftsd_total == 196131;
        detail += " ftsd=" + std::to_string(ftsd_total);

        const fs::path ftrp_out = work / "ftrp_corpus.jsonl";
        ok &= run_cli(cli,
                      "compile --strategy ftrp" + domain_args + " --seed 17 --out " +
                          q(ftrp_out),
                      work / "c2_ftrp.log") == 0;
        const auto records = load_records(ftrp_out);
        ok &= records.size() == 96131;
        const auto prompts = default_role_prompts();
        std::size_t verified = 0;
        for (const auto& r : records) {
            const auto role = prompts.roles.find(r.source_domain);
            if (role == prompts.roles.end()) break;
            const auto stripped = strip_prompt(r.prompt_text, role->second, "\n");
            if (!stripped || *stripped != r.instruction) break;
            ++verified;
        }
        ok &= verified == records.size();
        detail += " ftrp=" + std::to_string(records.size()) + " prefix_verified=" +
                  std::to_string(verified);

        criterion(2, "baseline corpus sizes FT/FTSD/FTRP", ok, detail);
    }

    // ------------------------------------------------------- criterion 3
    {
        const double f1_half = unigram_f1("a b", "a c");
        const double f1_two_thirds = unigram_f1("a a b", "a b b");

        ScoreMatrix m;
        m.rows = {"0-shot", "FT", "FTSD", "REGA"};
        m.cols = {"CGev"};
        m.values = {{7.42}, {5.41}, {6.26}, {6.87}};
        const auto n = normalize_scores(m);
        const double expected[4] = {1.0, 0.729110, 0.843666, 0.925876};
        bool norm_ok = true;
        for (int i = 0; i < 4; ++i) {
            norm_ok &= std::abs(n.values[i][0] - expected[i]) < 1e-6;
        }
        bool argmax_ok = true;
        for (int i = 1; i < 4; ++i) argmax_ok &= n.values[0][0] >= n.values[i][0];

        const bool ok = f1_half == 0.5 && std::abs(f1_two_thirds - 2.0 / 3.0) < 1e-12 &&
                        norm_ok && argmax_ok;
        criterion(3, "metric fixtures (uF1, column normalization)", ok);
    }

    // ------------------------------------------------------- criterion 4
    {
        bool ok = true;
        std::string detail;

        const fs::path small_general = work / "small_general.jsonl";
        write_standin_file(small_general, "general", {{"", 3000}});
        const fs::path out_a = work / "det_a.jsonl";
        const fs::path out_b = work / "det_b.jsonl";
        const std::string compile_args = "compile --strategy rega --domains " + q(law) +
                                         " --general " + q(small_general) +
                                         " --mixing-ratio 0.1 --seed 99 --out ";
        ok &= run_cli(cli, compile_args + q(out_a), work / "c4_a.log") == 0;
        ok &= run_cli(cli, compile_args + q(out_b), work / "c4_b.log") == 0;
        const bool compile_equal = sha256_file(out_a) == sha256_file(out_b);
        ok &= compile_equal;
        detail += std::string("compile_hash_equal=") + (compile_equal ? "yes" : "no");

        const fs::path toy_a = work / "toy_a.json";
        const fs::path toy_b = work / "toy_b.json";
        const std::string toy_args =
            "toy-demo --strategies ft,rega --seeds 2 --pretrain 400 --replay 400 "
            "--per-domain 200 --eval-general 200 --eval-domain 200 --out ";
        ok &= run_cli(cli, toy_args + q(toy_a), work / "c4_ta.log") == 0;
        ok &= run_cli(cli, toy_args + q(toy_b), work / "c4_tb.log") == 0;
        const bool toy_equal = sha256_file(toy_a) == sha256_file(toy_b);
        ok &= toy_equal;
        detail += std::string(" toy_hash_equal=") + (toy_equal ? "yes" : "no");

        criterion(4, "byte-identical reruns of compile and toy commands", ok, detail);
    }

    // ------------------------------------------------------- criterion 5
    {
        bool ok = true;
        std::string detail;
        for (const std::size_t k : {std::size_t{0}, std::size_t{2}, std::size_t{5}}) {
            InstructionSet set;
            for (int i = 0; i < 5; ++i) {
                set.items.push_back(
                    {"i" + std::to_string(i), "instruction " + std::to_string(i)});
            }
            auto make_job = [&](const fs::path& ckpt) {
                DistillJob job;
                job.instructions = set;
                job.concurrency_limit = 1;
                job.checkpoint_path = ckpt;
                job.retry.max_attempts = 1;
                job.retry.backoff_ms = {};
                return job;
            };

            const fs::path ckpt = work / ("ckpt_k" + std::to_string(k) + ".jsonl");
            MockGenerationClient interrupted;
            interrupted.set_unreachable_after(k);
            const auto first = distill(make_job(ckpt), interrupted);

            MockGenerationClient resumed;
            const auto second = distill(make_job(ckpt), resumed);

            MockGenerationClient clean;
            const auto uninterrupted =
                distill(make_job(work / ("ckpt_clean_k" + std::to_string(k) + ".jsonl")),
                        clean);

            const bool calls_ok = resumed.calls() == 5 - k;
            const bool data_ok =
                !second.halted && second.dataset == uninterrupted.dataset;
            ok &= calls_ok && data_ok;
            detail += "k=" + std::to_string(k) + ":calls=" +
                      std::to_string(resumed.calls()) + (data_ok ? "(ok) " : "(mismatch) ");
        }
        criterion(5, "distillation interrupt/resume with exact call counts", ok, detail);
    }

    // --------------------------------------------------- criteria 6 and 7
    std::vector<toy::ToyReport> ft_runs, ftsd_runs, ftrp_runs, rega_runs;
    {
        const auto t0 = std::chrono::steady_clock::now();
        const toy::ToySizes sizes;   // defaults
        const toy::ToyHyperparams hp; // defaults
        for (std::uint64_t seed = 1; seed <= 10; ++seed) {
            const auto world = toy::ToyWorld::make_default(seed);
            ft_runs.push_back(
                toy::run_experiment(Strategy::ft, world, 0.0, sizes, hp, seed));
            ftsd_runs.push_back(
                toy::run_experiment(Strategy::ftsd, world, 0.0, sizes, hp, seed));
            ftrp_runs.push_back(
                toy::run_experiment(Strategy::ftrp, world, 0.0, sizes, hp, seed));
            rega_runs.push_back(
                toy::run_experiment(Strategy::rega, world, 0.1, sizes, hp, seed));
        }
        const double secs = elapsed_s(t0);

        int forgets = 0, rega_over_ft = 0, ftsd_over_ft = 0;
        for (int i = 0; i < 10; ++i) {
            if (ft_runs[i].general_acc <= ft_runs[i].base_general_acc - 0.10) ++forgets;
            if (rega_runs[i].general_acc >= ft_runs[i].general_acc) ++rega_over_ft;
            if (ftsd_runs[i].general_acc >= ft_runs[i].general_acc) ++ftsd_over_ft;
        }
        const bool ok =
            forgets >= 8 && rega_over_ft >= 9 && ftsd_over_ft >= 9 && secs < 60.0;
        criterion(6, "toy-lab forgetting and replay mitigation over 10 seeds", ok,
                  "forgets=" + std::to_string(forgets) + "/10 rega>=ft=" +
                      std::to_string(rega_over_ft) + "/10 ftsd>=ft=" +
                      std::to_string(ftsd_over_ft) + "/10 time=" +
                      std::to_string(secs).substr(0, 4) + "s");

        int ftrp_over_ft = 0, rega_over_ftsd = 0;
        for (int i = 0; i < 10; ++i) {
            if (ftrp_runs[i].domain_mean_acc >= ft_runs[i].domain_mean_acc) ++ftrp_over_ft;
            if (rega_runs[i].domain_mean_acc >= ftsd_runs[i].domain_mean_acc) {
                ++rega_over_ftsd;
            }
        }
        const bool ok7 = ftrp_over_ft >= 8 && rega_over_ftsd >= 8;
        criterion(7, "toy-lab confusion mitigation and role transfer", ok7,
                  "ftrp>=ft=" + std::to_string(ftrp_over_ft) + "/10 rega>=ftsd=" +
                      std::to_string(rega_over_ftsd) + "/10");
    }

    // ------------------------------------------------------- criterion 8
    {
        const auto t0 = std::chrono::steady_clock::now();
        const toy::ToySizes sizes;
        const toy::ToyHyperparams hp;
        const std::vector<double> grid = {0.05, 0.1, 0.2, 0.3};
        const std::vector<std::uint64_t> seeds = {1, 2, 3, 4, 5};

        std::vector<double> ft_general;
        for (const auto seed : seeds) {
            const auto world = toy::ToyWorld::make_default(seed);
            ft_general.push_back(
                toy::run_experiment(Strategy::ft, world, 0.0, sizes, hp, seed)
                    .general_acc);
        }
        const double ft_median = median(ft_general);

        bool ok = true;
        std::string detail = "ft_med=" + std::to_string(ft_median).substr(0, 5);
        for (const double r : grid) {
            std::vector<double> rega_general;
            for (const auto seed : seeds) {
                const auto world = toy::ToyWorld::make_default(seed);
                rega_general.push_back(
                    toy::run_experiment(Strategy::rega, world, r, sizes, hp, seed)
                        .general_acc);
            }
            const double rega_median = median(rega_general);
            ok &= rega_median >= ft_median;
            detail += " r" + std::to_string(r).substr(0, 4) + "=" +
                      std::to_string(rega_median).substr(0, 5);
        }
        const double secs = elapsed_s(t0);
        ok &= secs < 300.0;
        criterion(8, "mixing-ratio sweep: REGA general >= FT general", ok,
                  detail + " time=" + std::to_string(secs).substr(0, 4) + "s");
    }

    // ------------------------------------------------------- criterion 9
    {
        const auto world = toy::ToyWorld::make_default(1);
        const auto data = toy::gen_domain(world, 1, 64, 5);
        const auto X = toy::featurize_batch(data, toy::ToyPrompt::role(1), world);
        Eigen::VectorXi y(X.cols());
        for (Eigen::Index i = 0; i < y.size(); ++i) y[i] = data[i].label;

        toy::ToyModel model = toy::ToyModel::zeros(world);
        DeterministicRng init(77, "acceptance-grad-init");
        for (int r = 0; r < model.weights.rows(); ++r) {
            for (int c = 0; c < model.weights.cols(); ++c) {
                model.weights(r, c) = init.next_double() - 0.5;
            }
            model.bias[r] = init.next_double() - 0.5;
        }

        const auto analytic = toy::loss_and_grad(model, X, y);
        const double h = 1e-5;
        DeterministicRng pick(78, "acceptance-grad-pick");
        int grad_ok = 0;
        const int points = 100;
        for (int t = 0; t < points; ++t) {
            const int r = static_cast<int>(pick.next_below(model.weights.rows()));
            const int c = static_cast<int>(pick.next_below(model.weights.cols()));
            auto plus = model;
            auto minus = model;
            plus.weights(r, c) += h;
            minus.weights(r, c) -= h;
            const double fd = (toy::loss_and_grad(plus, X, y).loss -
                               toy::loss_and_grad(minus, X, y).loss) /
                              (2 * h);
            const double an = analytic.grad_weights(r, c);
            const double rel =
                std::abs(fd - an) / std::max({1.0, std::abs(fd), std::abs(an)});
            if (rel <= 1e-4) ++grad_ok;
        }

        DeterministicRng lrng(79, "acceptance-softmax");
        bool softmax_ok = true;
        for (int t = 0; t < 500; ++t) {
            Eigen::MatrixXd logits(world.n_classes, 1);
            for (int r = 0; r < world.n_classes; ++r) {
                logits(r, 0) = (lrng.next_double() - 0.5) * 2000.0;
            }
            const auto p = toy::softmax_columns(logits);
            softmax_ok &= std::abs(p.col(0).sum() - 1.0) <= 1e-9;
        }

        criterion(9, "gradient vs finite differences; softmax normalization",
                  grad_ok == points && softmax_ok,
                  "grad_points_ok=" + std::to_string(grad_ok) + "/100");
    }

    std::cout << (g_failures == 0 ? "ALL CRITERIA PASSED"
                                  : std::to_string(g_failures) + " CRITERIA FAILED")
              << '\n';
    return g_failures == 0 ? 0 : 1;
}
