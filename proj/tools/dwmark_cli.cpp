// Command-line front end: embed, extract, attack, detect, bench.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "dwmark/dwmark.hpp"

using namespace dwmark;

namespace {

PipelineConfig make_config(const std::string& config_path, std::optional<double> q, std::optional<int> cap) {
    PipelineConfig cfg;
    if (!config_path.empty()) cfg = load_config(config_path);
    if (q) cfg.q = *q;
    if (cap) cfg.cap = *cap;
    cfg.validate();
    return cfg;
}

AttackChain load_chain(const std::string& spec, const std::string& spec_file) {
    if (!spec.empty() && !spec_file.empty())
        throw std::invalid_argument("give either an attack string or a spec file, not both");
    if (!spec_file.empty()) {
        std::ifstream f(spec_file);
        if (!f) throw std::runtime_error("cannot open attack spec file " + spec_file);
        nlohmann::json j;
        f >> j;
        return chain_from_json(j);
    }
    return parse_attack_string(spec.empty() ? "identity" : spec);
}

std::unique_ptr<Detector> make_detector(const std::string& kind, const std::string& record_path,
                                        const AttackChain& chain) {
    if (kind == "residual") return std::make_unique<ResidualEnergyDetector>();
    if (kind != "oracle") throw std::invalid_argument("detector must be oracle or residual");
    if (record_path.empty()) throw std::invalid_argument("the oracle detector needs --record");
    PlacementRecord rec = load_record(record_path);
    if (rec.height <= 0 || rec.width <= 0)
        throw std::invalid_argument("placement record is missing the cover dimensions");
    return std::make_unique<OracleDetector>(rec, chain);
}

std::vector<std::string> read_attack_list(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("cannot open attacks file " + path);
    std::vector<std::string> out;
    std::string line;
    while (std::getline(f, line)) {
        auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        while (!line.empty() && (line.back() == ' ' || line.back() == '\t' || line.back() == '\r')) line.pop_back();
        std::size_t start = line.find_first_not_of(" \t");
        if (start == std::string::npos) continue;
        out.push_back(line.substr(start));
    }
    return out;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"dispersed blind image watermarking"};
    app.require_subcommand(1);

    // embed
    auto* embed_cmd = app.add_subcommand("embed", "embed a payload into a cover image");
    std::string in, out, payload_hex, config_path, record_path;
    std::uint64_t key_seed = 0, plan_seed = 0;
    std::optional<double> q;
    std::optional<int> cap;
    embed_cmd->add_option("-i,--input", in, "cover image (png/jpeg)")->required();
    embed_cmd->add_option("-o,--output", out, "watermarked output (png recommended)")->required();
    embed_cmd->add_option("--payload", payload_hex, "22-bit payload as hex (up to 6 digits)")->required();
    embed_cmd->add_option("--key", key_seed, "codec key seed")->required();
    embed_cmd->add_option("--seed", plan_seed, "placement seed")->required();
    embed_cmd->add_option("--q", q, "area budget percent (default 25)");
    embed_cmd->add_option("--cap", cap, "max block count (default 20)");
    embed_cmd->add_option("--record", record_path, "write the placement record here");
    embed_cmd->add_option("--config", config_path, "pipeline config json");

    // extract
    auto* extract_cmd = app.add_subcommand("extract", "extract and verify a payload");
    std::string detector_kind = "residual", attack_str, attack_file, report_out;
    extract_cmd->add_option("-i,--input", in, "image to inspect")->required();
    extract_cmd->add_option("--key", key_seed, "codec key seed")->required();
    extract_cmd->add_option("--detector", detector_kind, "oracle or residual (default residual)");
    extract_cmd->add_option("--record", record_path, "placement record (oracle detector)");
    extract_cmd->add_option("--attack", attack_str, "attack string the image went through (oracle)");
    extract_cmd->add_option("--attack-file", attack_file, "attack spec json (oracle)");
    extract_cmd->add_option("-o,--output", report_out, "write the report json here (default stdout)");
    extract_cmd->add_option("--config", config_path, "pipeline config json");

    // attack
    auto* attack_cmd = app.add_subcommand("attack", "apply a seeded attack chain");
    std::string cover_path, donor_path, save_spec;
    attack_cmd->add_option("-i,--input", in, "input image")->required();
    attack_cmd->add_option("-o,--output", out, "attacked output")->required();
    attack_cmd->add_option("--spec", attack_str, "attack string, e.g. rotate:seed=7 or crop+jpeg:seed=5");
    attack_cmd->add_option("--spec-file", attack_file, "attack spec json");
    attack_cmd->add_option("--cover", cover_path, "cover image (needed by dropout)");
    attack_cmd->add_option("--donor", donor_path, "clean donor image (needed by pip/occlusion)");
    attack_cmd->add_option("--save-spec", save_spec, "write the sampled spec json here for replay");

    // detect
    auto* detect_cmd = app.add_subcommand("detect", "write the detection mask");
    detect_cmd->add_option("-i,--input", in, "image to inspect")->required();
    detect_cmd->add_option("-o,--output", out, "mask output (1-bit png)")->required();
    detect_cmd->add_option("--detector", detector_kind, "oracle or residual (default residual)");
    detect_cmd->add_option("--record", record_path, "placement record (oracle detector)");
    detect_cmd->add_option("--attack", attack_str, "attack string (oracle)");
    detect_cmd->add_option("--attack-file", attack_file, "attack spec json (oracle)");
    detect_cmd->add_option("--config", config_path, "pipeline config json");

    // bench
    auto* bench_cmd = app.add_subcommand("bench", "run the robustness benchmark");
    std::string dataset, attacks_file, out_dir;
    std::uint64_t master_seed = 0;
    bench_cmd->add_option("--dataset", dataset, "directory of cover images")->required();
    bench_cmd->add_option("--attacks", attacks_file, "file with one attack label per line")->required();
    bench_cmd->add_option("--out", out_dir, "output directory")->required();
    bench_cmd->add_option("--master-seed", master_seed, "master seed")->required();
    bench_cmd->add_option("--detector", detector_kind, "oracle or residual (default residual)");
    bench_cmd->add_option("--config", config_path, "pipeline config json");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*embed_cmd) {
            PipelineConfig cfg = make_config(config_path, q, cap);
            ImageBuffer cover = read_image(in);
            auto [wm, rec] = embed(cover, payload_from_hex(payload_hex), CodecKey{key_seed}, plan_seed, cfg, in);
            write_image(wm, out);
            if (!record_path.empty()) save_record(rec, record_path);
            std::printf("embedded %zu blocks, psnr %.2f dB\n", rec.rects.size(), psnr(wm, cover));
        } else if (*extract_cmd) {
            PipelineConfig cfg = make_config(config_path, std::nullopt, std::nullopt);
            ImageBuffer img = read_image(in);
            AttackChain chain;
            if (!attack_str.empty() || !attack_file.empty()) chain = load_chain(attack_str, attack_file);
            auto detector = make_detector(detector_kind, record_path, chain);
            ExtractionReport rep = extract(img, CodecKey{key_seed}, *detector, cfg);
            std::string doc = report_to_json(rep).dump(2);
            if (report_out.empty()) {
                std::printf("%s\n", doc.c_str());
            } else {
                std::ofstream f(report_out);
                f << doc << "\n";
            }
            if (rep.status == ExtractionStatus::not_found) return 2;
        } else if (*attack_cmd) {
            ImageBuffer img = read_image(in);
            AttackChain chain = load_chain(attack_str, attack_file);
            std::optional<ImageBuffer> cover, donor;
            if (!cover_path.empty()) cover = read_image(cover_path);
            if (!donor_path.empty()) donor = read_image(donor_path);
            ImageBuffer attacked =
                apply_combined(img, chain, cover ? &*cover : nullptr, donor ? &*donor : nullptr);
            write_image(attacked, out);
            if (!save_spec.empty()) {
                std::ofstream f(save_spec);
                f << chain_to_json(chain).dump(2) << "\n";
            }
            std::printf("attacked image: %dx%d -> %dx%d\n", img.width, img.height, attacked.width,
                        attacked.height);
        } else if (*detect_cmd) {
            PipelineConfig cfg = make_config(config_path, std::nullopt, std::nullopt);
            ImageBuffer img = read_image(in);
            AttackChain chain;
            if (!attack_str.empty() || !attack_file.empty()) chain = load_chain(attack_str, attack_file);
            auto detector = make_detector(detector_kind, record_path, chain);
            MaskBuffer mask = detect(img, *detector, cfg.tile_size);
            write_mask_png(mask, out);
            std::printf("mask written: %zu of %zu pixels set\n", mask.count_set(), mask.values.size());
        } else if (*bench_cmd) {
            PipelineConfig cfg = make_config(config_path, std::nullopt, std::nullopt);
            BenchReport rep = bench(dataset, read_attack_list(attacks_file), cfg, master_seed, detector_kind,
                                    out_dir);
            std::printf("%s", bench_to_table(rep).c_str());
            std::printf("wall clock: %.1f s\n", rep.wall_seconds);
        }
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}
