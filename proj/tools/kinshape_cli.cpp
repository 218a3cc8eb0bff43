// Command-line front end for the shape-comparison pipeline: compare two
// landmark files, self-check the analytic gradients, generate synthetic
// datasets, and train/evaluate/ablate the pair classifier.
//
// Exit codes: 0 success, 1 failed check, 2 usage or config error,
// 3 data/format error, 4 numerical degeneracy, 5 training divergence.

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <iostream>
#include <random>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "kinshape/data.hpp"
#include "kinshape/eval.hpp"
#include "kinshape/grassmann.hpp"
#include "kinshape/network.hpp"
#include "kinshape/serialize.hpp"

namespace fs = std::filesystem;
using kinshape::Centering;
using kinshape::GapDenominator;
using kinshape::LandmarkShape;
using kinshape::Matrix;

namespace {

std::string fmt(double v) { return kinshape::detail::format_double(v); }

Centering centering_from_flag(const std::string& s) {
    return kinshape::detail::centering_from_name(s);
}

// Accept either a dataset directory or a direct path to its manifest.
std::string manifest_path(const std::string& data) {
    if (fs::is_directory(data)) return (fs::path(data) / "manifest.csv").string();
    return data;
}

nlohmann::json load_config_file(const std::string& path) {
    return kinshape::read_json_file(path);
}

// --- compare -----------------------------------------------------------------

int cmd_compare(const std::string& path_a, const std::string& path_b,
                const std::string& centering_flag) {
    const Centering centering = centering_from_flag(centering_flag);
    const LandmarkShape a = kinshape::load_landmarks(path_a);
    const LandmarkShape b = kinshape::load_landmarks(path_b);
    const auto da = kinshape::shape_to_projector(a, centering);
    const auto db = kinshape::shape_to_projector(b, centering);
    const auto feature = kinshape::aisc_forward(da, db);
    const auto geo = kinshape::geodesic_info(feature, da, db);

    std::cout << "feature_norm=" << fmt(frobenius_norm(feature.b)) << "\n";
    std::cout << "principal_cosines=";
    for (std::size_t i = 0; i < geo.principal_cosines.size(); ++i)
        std::cout << (i ? "," : "") << fmt(geo.principal_cosines[i]);
    std::cout << "\nprincipal_angles=";
    for (std::size_t i = 0; i < geo.principal_cosines.size(); ++i)
        std::cout << (i ? "," : "") << fmt(std::acos(std::min(1.0, geo.principal_cosines[i])));
    std::cout << "\ncentering=" << kinshape::detail::centering_name(centering) << "\n";
    return 0;
}

// --- gradcheck -----------------------------------------------------------------

// Central finite differences of a scalar function over one landmark slot.
template <typename F>
Matrix fd_gradient(F&& f, const Matrix& at, double h) {
    Matrix grad(at.rows(), at.cols());
    for (std::size_t i = 0; i < at.rows(); ++i)
        for (std::size_t j = 0; j < at.cols(); ++j) {
            Matrix up = at, dn = at;
            up(i, j) += h;
            dn(i, j) -= h;
            grad(i, j) = (f(up) - f(dn)) / (2.0 * h);
        }
    return grad;
}

double rel_error(const Matrix& got, const Matrix& want) {
    return frobenius_norm(got - want) / std::max(1.0, frobenius_norm(want));
}

double inner(const Matrix& a, const Matrix& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.values().size(); ++i) s += a.values()[i] * b.values()[i];
    return s;
}

int cmd_gradcheck(std::uint64_t seed, std::size_t m, std::size_t trials) {
    if (m < 3) throw kinshape::config_error("--m must be at least 3");
    if (trials < 1) throw kinshape::config_error("--trials must be at least 1");

    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(-1.0, 1.0);
    auto random_matrix = [&](std::size_t r, std::size_t c) {
        Matrix out(r, c);
        for (double& v : out.values()) v = unit(rng);
        return out;
    };

    double max_svd = 0.0, max_gram = 0.0, max_disagreement = 0.0;
    double max_sum_form = 0.0;
    double min_sum_form = std::numeric_limits<double>::infinity();
    const double h = 1e-6;

    for (std::size_t t = 0; t < trials; ++t) {
        Matrix s0 = random_matrix(m, 2), s1 = random_matrix(m, 2);
        const Matrix upstream = random_matrix(m, m);
        // Redraw the rare spectrally degenerate pair; the check targets the
        // generic case where the coupled solve is defined.
        for (int attempt = 0; attempt < 32; ++attempt) {
            try {
                const LandmarkShape a{s0}, b{s1};
                const auto da = kinshape::shape_to_projector(a);
                const auto db = kinshape::shape_to_projector(b);
                (void)kinshape::aisc_backward_svd(a, b, da, db, upstream);
                break;
            } catch (const kinshape::error&) {
                s0 = random_matrix(m, 2);
                s1 = random_matrix(m, 2);
            }
        }

        const LandmarkShape a{s0}, b{s1};
        const auto da = kinshape::shape_to_projector(a);
        const auto db = kinshape::shape_to_projector(b);
        const auto svd_grads = kinshape::aisc_backward_svd(a, b, da, db, upstream);
        const auto gram_grads = kinshape::aisc_backward_projector(a, b, da, db, upstream);
        const auto sum_grads =
            kinshape::aisc_backward_svd(a, b, da, db, upstream, GapDenominator::sum);

        auto loss_a = [&](const Matrix& pts) {
            return inner(upstream, kinshape::aisc_forward(LandmarkShape{pts}, b).b);
        };
        auto loss_b = [&](const Matrix& pts) {
            return inner(upstream, kinshape::aisc_forward(a, LandmarkShape{pts}).b);
        };
        const Matrix fd_a = fd_gradient(loss_a, s0, h);
        const Matrix fd_b = fd_gradient(loss_b, s1, h);

        max_svd = std::max({max_svd, rel_error(svd_grads.grad_s0, fd_a),
                            rel_error(svd_grads.grad_s1, fd_b)});
        max_gram = std::max({max_gram, rel_error(gram_grads.grad_s0, fd_a),
                             rel_error(gram_grads.grad_s1, fd_b)});
        max_disagreement =
            std::max({max_disagreement,
                      rel_error(svd_grads.grad_s0, gram_grads.grad_s0),
                      rel_error(svd_grads.grad_s1, gram_grads.grad_s1)});
        const double sum_err = std::max(rel_error(sum_grads.grad_s0, fd_a),
                                        rel_error(sum_grads.grad_s1, fd_b));
        max_sum_form = std::max(max_sum_form, sum_err);
        min_sum_form = std::min(min_sum_form, sum_err);
    }

    const bool pass = max_svd < 1e-4 && max_gram < 1e-4 && max_disagreement < 1e-8;
    std::cout << "trials=" << trials << " m=" << m << " seed=" << seed << "\n";
    std::cout << "max_rel_error_svd_path=" << fmt(max_svd) << "\n";
    std::cout << "max_rel_error_projector_path=" << fmt(max_gram) << "\n";
    std::cout << "max_path_disagreement=" << fmt(max_disagreement) << "\n";
    std::cout << "spectral_gap_denominator=difference"
              << " (sum form rel error: min=" << fmt(min_sum_form)
              << " max=" << fmt(max_sum_form) << ")\n";
    std::cout << "result=" << (pass ? "PASS" : "FAIL") << "\n";
    return pass ? 0 : 1;
}

// --- synth ---------------------------------------------------------------------

int cmd_synth(const std::string& config_path, const std::string& out_dir,
              bool seed_set, std::uint64_t seed, bool families_set, std::size_t families,
              std::size_t folds) {
    kinshape::SynthConfig config;
    if (!config_path.empty())
        config = kinshape::synth_config_from_json(load_config_file(config_path));
    if (seed_set) config.seed = seed;
    if (families_set) config.family_count = families;
    kinshape::detail::validate(config);
    if (folds < 2) throw kinshape::config_error("--folds must be at least 2");

    auto samples = kinshape::generate_synthetic(config);
    samples = kinshape::assign_folds(std::move(samples), folds, config.seed);

    fs::create_directories(out_dir);
    const std::string manifest = kinshape::write_dataset(out_dir, samples);
    nlohmann::json echo = kinshape::to_json(config);
    echo["folds"] = folds;
    kinshape::write_json_file((fs::path(out_dir) / "synth_config.json").string(), echo);

    std::cout << "samples=" << samples.size() << "\n";
    std::cout << "manifest=" << manifest << "\n";
    return 0;
}

// --- train / eval / ablate -------------------------------------------------------

kinshape::TrainConfig resolve_train_config(const std::string& config_path, bool seed_set,
                                           std::uint64_t seed) {
    kinshape::TrainConfig config;
    if (!config_path.empty())
        config = kinshape::train_config_from_json(load_config_file(config_path));
    if (seed_set) config.seed = seed;
    kinshape::validate(config);
    return config;
}

std::size_t fold_count_of(const std::vector<kinshape::PairSample>& samples) {
    int top = -1;
    for (const auto& s : samples) top = std::max(top, s.fold);
    if (top < 1)
        throw kinshape::config_error("dataset carries no usable fold assignment");
    return static_cast<std::size_t>(top) + 1;
}

int cmd_train(const std::string& data, const std::string& config_path,
              const std::string& out_dir, bool seed_set, std::uint64_t seed) {
    const auto config = resolve_train_config(config_path, seed_set, seed);
    const auto samples = kinshape::load_pairs(manifest_path(data));
    const auto result = kinshape::train(samples, config);

    fs::create_directories(out_dir);
    const std::string checkpoint = (fs::path(out_dir) / "checkpoint.json").string();
    kinshape::save_checkpoint(checkpoint, result.model);

    std::cout << "samples=" << samples.size() << "\n";
    std::cout << "epochs=" << result.history.size() << "\n";
    if (!result.history.empty()) {
        const auto& last = result.history.back();
        std::cout << "final_shape_loss=" << fmt(last.shape_loss) << "\n";
        std::cout << "final_appearance_loss=" << fmt(last.appearance_loss) << "\n";
    }
    std::cout << "checkpoint=" << checkpoint << "\n";
    return 0;
}

int cmd_eval(const std::string& data, const std::string& config_path,
             const std::string& out_dir, bool seed_set, std::uint64_t seed,
             std::size_t jobs) {
    const auto config = resolve_train_config(config_path, seed_set, seed);
    const auto samples = kinshape::load_pairs(manifest_path(data));
    const auto report = kinshape::cross_validate(samples, config, fold_count_of(samples), jobs);

    fs::create_directories(out_dir);
    const std::string text_path = (fs::path(out_dir) / "report.txt").string();
    {
        std::ofstream out(text_path, std::ios::binary);
        if (!out) throw kinshape::io_error("cannot open for writing: " + text_path);
        out << kinshape::report_text(report);
    }
    kinshape::write_json_file((fs::path(out_dir) / "report.json").string(),
                              kinshape::report_to_json(report));

    std::cout << "mean_accuracy=" << fmt(report.mean_accuracy) << "\n";
    std::cout << "report=" << text_path << "\n";
    return 0;
}

int cmd_ablate(const std::string& data, const std::string& config_path,
               const std::string& out_dir, bool seed_set, std::uint64_t seed,
               std::size_t jobs) {
    const auto config = resolve_train_config(config_path, seed_set, seed);
    const auto samples = kinshape::load_pairs(manifest_path(data));
    const auto result = kinshape::ablation(samples, config, fold_count_of(samples), jobs);

    fs::create_directories(out_dir);
    const std::string text_path = (fs::path(out_dir) / "ablation.txt").string();
    {
        std::ofstream out(text_path, std::ios::binary);
        if (!out) throw kinshape::io_error("cannot open for writing: " + text_path);
        out << kinshape::ablation_text(result);
    }
    kinshape::write_json_file((fs::path(out_dir) / "ablation.json").string(),
                              kinshape::ablation_to_json(result));

    for (const auto& row : result.rows)
        std::cout << row.setting << "=" << fmt(row.mean_accuracy) << "\n";
    std::cout << "ablation=" << text_path << "\n";
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Affine-invariant landmark shape comparison and kin-pair verification"};
    app.require_subcommand(1);

    // compare
    auto* compare = app.add_subcommand("compare", "Compare two landmark files");
    std::string cmp_a, cmp_b, cmp_centering = "on";
    compare->add_option("shape_a", cmp_a, "first landmark file")->required();
    compare->add_option("shape_b", cmp_b, "second landmark file")->required();
    compare->add_option("--centering", cmp_centering, "center landmarks first: on|off")
        ->check(CLI::IsMember({"on", "off"}));

    // gradcheck
    auto* gradcheck = app.add_subcommand("gradcheck", "Check analytic gradients against finite differences");
    std::uint64_t gc_seed = 1;
    std::size_t gc_m = 10, gc_trials = 20;
    gradcheck->add_option("--seed", gc_seed, "random seed (default 1)");
    gradcheck->add_option("--m", gc_m, "landmarks per shape (default 10)");
    gradcheck->add_option("--trials", gc_trials, "random pairs to test (default 20)");

    // synth
    auto* synth = app.add_subcommand("synth", "Generate a synthetic kin-pair dataset");
    std::string sy_config, sy_out;
    std::uint64_t sy_seed = 0;
    std::size_t sy_families = 0, sy_folds = 5;
    synth->add_option("--config", sy_config, "JSON generator config")->check(CLI::ExistingFile);
    synth->add_option("--out", sy_out, "output dataset directory")->required();
    auto* sy_seed_opt = synth->add_option("--seed", sy_seed, "override the config seed");
    auto* sy_fam_opt = synth->add_option("--families", sy_families, "override the family count");
    synth->add_option("--folds", sy_folds, "cross-validation folds to assign (default 5)");

    // train / eval / ablate share their surface
    std::string tr_data, tr_config, tr_out;
    std::uint64_t tr_seed = 0;
    auto* train = app.add_subcommand("train", "Train the pair classifier on a dataset");
    train->add_option("--data", tr_data, "dataset directory or manifest")->required();
    train->add_option("--config", tr_config, "JSON training config")->check(CLI::ExistingFile);
    train->add_option("--out", tr_out, "output directory")->required();
    auto* tr_seed_opt = train->add_option("--seed", tr_seed, "override the config seed");

    std::string ev_data, ev_config, ev_out;
    std::uint64_t ev_seed = 0;
    std::size_t ev_jobs = 1;
    auto* evalc = app.add_subcommand("eval", "Cross-validated evaluation on a dataset");
    evalc->add_option("--data", ev_data, "dataset directory or manifest")->required();
    evalc->add_option("--config", ev_config, "JSON training config")->check(CLI::ExistingFile);
    evalc->add_option("--out", ev_out, "output directory")->required();
    auto* ev_seed_opt = evalc->add_option("--seed", ev_seed, "override the config seed");
    evalc->add_option("--jobs", ev_jobs, "parallel fold workers (default 1)");

    std::string ab_data, ab_config, ab_out;
    std::uint64_t ab_seed = 0;
    std::size_t ab_jobs = 1;
    auto* ablate = app.add_subcommand("ablate", "Per-branch ablation on a dataset");
    ablate->add_option("--data", ab_data, "dataset directory or manifest")->required();
    ablate->add_option("--config", ab_config, "JSON training config")->check(CLI::ExistingFile);
    ablate->add_option("--out", ab_out, "output directory")->required();
    auto* ab_seed_opt = ablate->add_option("--seed", ab_seed, "override the config seed");
    ablate->add_option("--jobs", ab_jobs, "parallel fold workers (default 1)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::Success& e) {
        return app.exit(e); // --help and friends: exit 0
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        if (compare->parsed()) return cmd_compare(cmp_a, cmp_b, cmp_centering);
        if (gradcheck->parsed()) return cmd_gradcheck(gc_seed, gc_m, gc_trials);
        if (synth->parsed())
            return cmd_synth(sy_config, sy_out, sy_seed_opt->count() > 0, sy_seed,
                             sy_fam_opt->count() > 0, sy_families, sy_folds);
        if (train->parsed())
            return cmd_train(tr_data, tr_config, tr_out, tr_seed_opt->count() > 0, tr_seed);
        if (evalc->parsed())
            return cmd_eval(ev_data, ev_config, ev_out, ev_seed_opt->count() > 0, ev_seed,
                            ev_jobs);
        if (ablate->parsed())
            return cmd_ablate(ab_data, ab_config, ab_out, ab_seed_opt->count() > 0, ab_seed,
                              ab_jobs);
        std::cerr << "kinshape: no subcommand given\n";
        return 2;
    } catch (const kinshape::divergence_error& e) {
        std::cerr << "kinshape: training diverged at epoch " << e.epoch() << ": " << e.what()
                  << "\n";
        return 5;
    } catch (const kinshape::degenerate_shape_error& e) {
        std::cerr << "kinshape: degenerate shape: " << e.what() << "\n";
        return 4;
    } catch (const kinshape::degenerate_spectrum_error& e) {
        std::cerr << "kinshape: degenerate spectrum: " << e.what() << "\n";
        return 4;
    } catch (const kinshape::config_error& e) {
        std::cerr << "kinshape: config error: " << e.what() << "\n";
        return 2;
    } catch (const kinshape::error& e) {
        // data, format, io, shape, and input validation problems
        std::cerr << "kinshape: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "kinshape: unexpected error: " << e.what() << "\n";
        return 1;
    }
}
