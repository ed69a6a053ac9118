// SPDX-License-Identifier: Apache-2.0
//
// weibench command-line entry point.
//
// Subcommands: gen-scene, build-dataset, bench-pl, csi, grad-check.
// Exit codes: 0 success, 1 validation error, 2 runtime/numeric error.
// Errors are also emitted as a single JSON object on stderr.

#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "weibench/cli.hpp"

namespace {

int fail(const char* kind, const std::string& message, int code) {
    weibench::json err;
    err["kind"] = kind;
    err["message"] = message;
    std::cerr << err.dump() << "\n";
    return code;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"urban radio scene benchmark: scene synthesis, channel oracle, "
                 "WEI extraction, and prediction studies"};
    app.require_subcommand(1);

    std::string config_path, scene_path, dataset_dir, out_dir = ".";
    std::optional<std::uint64_t> seed;
    std::optional<int> threads;
    int gradcheck_models = 20;

    auto* gen = app.add_subcommand("gen-scene", "generate a scene from a config");
    gen->add_option("--config", config_path, "run config JSON")->required();
    gen->add_option("--out", out_dir, "output directory");
    gen->add_option("--seed", seed, "override the master seed");

    auto* build = app.add_subcommand("build-dataset", "build the per-link dataset");
    build->add_option("--scene", scene_path, "scene JSON from gen-scene")->required();
    build->add_option("--config", config_path, "run config JSON")->required();
    build->add_option("--out", out_dir, "output directory");
    build->add_option("--threads", threads, "worker threads for link tracing");

    auto* bench = app.add_subcommand("bench-pl", "train and compare the four PL predictors");
    bench->add_option("--dataset", dataset_dir, "dataset directory")->required();
    bench->add_option("--out", out_dir, "output directory");
    bench->add_option("--config", config_path, "override the stored run config");

    auto* csi = app.add_subcommand("csi", "pilot-ratio CSI recovery study");
    csi->add_option("--dataset", dataset_dir, "dataset directory")->required();
    csi->add_option("--out", out_dir, "output directory");
    csi->add_option("--config", config_path, "override the stored run config");

    auto* grad = app.add_subcommand("grad-check", "gradient verification property suite");
    grad->add_option("--models", gradcheck_models, "random models per layer type");

    CLI11_PARSE(app, argc, argv);

    try {
        if (gen->parsed()) {
            weibench::cmd_gen_scene(config_path, out_dir, seed);
        } else if (build->parsed()) {
            weibench::cmd_build_dataset(scene_path, config_path, out_dir, threads);
        } else if (bench->parsed()) {
            std::optional<weibench::fs::path> override;
            if (!config_path.empty()) override = config_path;
            weibench::cmd_bench_pl(dataset_dir, out_dir, override);
        } else if (csi->parsed()) {
            std::optional<weibench::fs::path> override;
            if (!config_path.empty()) override = config_path;
            weibench::cmd_csi(dataset_dir, out_dir, override);
        } else if (grad->parsed()) {
            if (const char* env = std::getenv("GRADCHECK_SEEDS"))
                gradcheck_models = std::max(gradcheck_models, std::atoi(env));
            if (!weibench::cmd_grad_check(gradcheck_models))
                return fail("GradCheckFailure", "gradient check exceeded tolerance", 2);
        }
    } catch (const weibench::ConfigError& e) {
        return fail("ConfigError", e.what(), 1);
    } catch (const weibench::PlacementInfeasible& e) {
        return fail("PlacementInfeasible", e.what(), 1);
    } catch (const weibench::SpecMismatch& e) {
        return fail("SpecMismatch", e.what(), 1);
    } catch (const weibench::ShapeMismatch& e) {
        return fail("ShapeMismatch", e.what(), 1);
    } catch (const weibench::NonFiniteLoss& e) {
        return fail("NonFiniteLoss", e.what(), 2);
    } catch (const weibench::IoError& e) {
        return fail("IoError", e.what(), 2);
    } catch (const std::exception& e) {
        return fail("RuntimeError", e.what(), 2);
    }
    return 0;
}
