// Command-line front end: extraction, ground-truth encoding, losses,
// evaluation, PR curves, rankings and feature inspection.

#include <leader/leader.hpp>

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using namespace leader;

namespace {

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

io::RunConfig load_config(const std::string& path) {
    return path.empty() ? io::RunConfig{} : io::read_run_config(path);
}

void ensure_dir(const std::string& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw io::FileError("cannot create directory '" + dir + "'");
}

Tensor load_map(const fs::path& path) {
    Tensor t = io::load_image(path);
    if (t.channels() != 1) throw StructuralError(path.string() + ": expected a single-channel map");
    return t;
}

/// Angles in (-pi, pi] shown as [0, 1] gray.
Tensor angle_preview(const Tensor& d) {
    Tensor out(d.height(), d.width(), 1);
    for (std::size_t k = 0; k < d.size(); ++k)
        out.data()[k] = static_cast<float>((d.data()[k] + std::numbers::pi) / (2.0 * std::numbers::pi));
    return out;
}

Model load_model(const std::string& weights, const io::RunConfig& cfg) {
    if (weights.empty()) throw UsageError("no weights given (use --weights or set LEADER_WEIGHTS)");
    Model m = build_model(io::read_weights(weights), cfg.model);
    m.postprocessing = cfg.postprocess;
    for (const auto& name : m.unused_tensors()) std::cerr << "warning: unused weight tensor '" << name << "'\n";
    return m;
}

eval::ThresholdLevel pick_level(int index, std::optional<double> rho, std::optional<double> theta) {
    const auto& levels = eval::standard_levels();
    if (index < 0 || index >= static_cast<int>(levels.size())) throw UsageError("--level must be 0, 1 or 2");
    eval::ThresholdLevel level = levels[static_cast<std::size_t>(index)];
    if (rho) level.rho_t = *rho;
    if (theta) level.theta_t = *theta;
    level.validate();
    return level;
}

struct EvalInputs {
    MinutiaSet extracted;
    MinutiaSet gt;
    bool empty_mask = false;
};

EvalInputs load_eval_inputs(const std::string& extracted, const std::string& gt, const std::string& mask,
                            std::optional<double> tau) {
    EvalInputs in;
    in.extracted = io::read_minutiae(extracted);
    in.gt = io::read_minutiae(gt);
    if (tau) {
        std::erase_if(in.extracted.items, [&](const Minutia& m) { return m.quality < *tau; });
    }
    if (!mask.empty()) {
        const Tensor m = load_map(mask);
        const auto ce = eval::crop_and_filter(in.extracted, m);
        const auto cg = eval::crop_and_filter(in.gt, m);
        in.extracted = ce.set;
        in.gt = cg.set;
        in.empty_mask = ce.empty_mask;
        if (in.empty_mask) std::cerr << "warning: mask has no foreground; nothing to evaluate\n";
    }
    return in;
}

std::vector<io::CsvRow> operating_point_rows(const std::vector<eval::OperatingPoint>& ops) {
    std::vector<io::CsvRow> rows{{"tau", "precision", "recall", "f1", "tp", "fp", "fn"}};
    for (const auto& op : ops) {
        rows.push_back({io::csv_number(op.tau), io::csv_number(op.precision), io::csv_number(op.recall),
                        io::csv_number(op.f1), std::to_string(op.tp), std::to_string(op.fp), std::to_string(op.fn)});
    }
    return rows;
}

/// Reads "sample,f1" rows; a first row whose f1 cell is not numeric is a header.
std::vector<std::pair<std::string, double>> read_f1_csv(const fs::path& path) {
    const auto rows = io::read_csv(path);
    std::vector<std::pair<std::string, double>> out;
    for (std::size_t r = 0; r < rows.size(); ++r) {
        if (rows[r].size() != 2) {
            throw io::FormatError(path.string() + ": row " + std::to_string(r + 1) + " needs 2 fields (sample,f1)");
        }
        char* end = nullptr;
        const double v = std::strtod(rows[r][1].c_str(), &end);
        const bool numeric = !rows[r][1].empty() && end == rows[r][1].c_str() + rows[r][1].size();
        if (!numeric) {
            if (r == 0) continue;
            throw io::FormatError(path.string() + ": row " + std::to_string(r + 1) + " has non-numeric f1 '" +
                                  rows[r][1] + "'");
        }
        out.emplace_back(rows[r][0], v);
    }
    return out;
}

eval::F1Table read_f1_directory(const fs::path& dir) {
    if (!fs::is_directory(dir)) throw io::FileError("'" + dir.string() + "' is not a directory");
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(dir))
        if (e.is_regular_file() && e.path().extension() == ".csv") files.push_back(e.path());
    std::sort(files.begin(), files.end());
    if (files.size() < 2) throw StructuralError("rank: need CSV files for at least two methods in '" + dir.string() + "'");

    eval::F1Table table;
    for (const auto& f : files) {
        const auto rows = read_f1_csv(f);
        if (table.methods.empty()) {
            for (const auto& [s, v] : rows) table.samples.push_back(s);
        }
        std::map<std::string, double> by_sample;
        for (const auto& [s, v] : rows) {
            if (!by_sample.emplace(s, v).second) throw io::FormatError(f.string() + ": sample '" + s + "' listed twice");
        }
        if (by_sample.size() != table.samples.size()) {
            throw StructuralError(f.string() + ": sample set differs from '" + files.front().string() + "'");
        }
        std::vector<double> row;
        for (const auto& s : table.samples) {
            const auto it = by_sample.find(s);
            if (it == by_sample.end()) throw StructuralError(f.string() + ": missing sample '" + s + "'");
            row.push_back(it->second);
        }
        table.methods.push_back(f.stem().string());
        table.f1.push_back(std::move(row));
    }
    return table;
}

// ---------------------------------------------------------------------------

int run(int argc, char** argv) {
    CLI::App app{"Minutiae extraction and evaluation toolkit"};
    app.require_subcommand(1);
    app.fallthrough();
    std::string config_path;
    app.add_option("--config", config_path, "JSON run configuration (model, cmr, postprocess, loss)")->check(CLI::ExistingFile);

    // extract
    auto* extract = app.add_subcommand("extract", "Extract minutiae from a grayscale image");
    std::string ex_image, ex_weights, ex_output, ex_maps;
    std::optional<double> ex_tau;
    extract->add_option("--image", ex_image, "PGM (P5) or PNG grayscale image")->required()->check(CLI::ExistingFile);
    extract->add_option("--weights", ex_weights, "Weight container")->envname("LEADER_WEIGHTS");
    extract->add_option("--output", ex_output, "Minutiae file to write")->required();
    extract->add_option("--tau", ex_tau, "Quality threshold (default from config, 0.6)");
    extract->add_option("--maps", ex_maps, "Directory for predicted maps (.pfm exact, .png preview)");

    // encode-gt
    auto* encode = app.add_subcommand("encode-gt", "Encode ground-truth minutiae into P/W/D/T maps");
    std::string en_minutiae, en_output;
    std::optional<std::size_t> en_width, en_height;
    std::optional<double> en_delta, en_beta, en_sigma, en_lambda;
    bool en_png = false;
    encode->add_option("--minutiae", en_minutiae, "Ground-truth minutiae file")->required()->check(CLI::ExistingFile);
    encode->add_option("--output-dir", en_output, "Directory for P.pfm, W.pfm, D.pfm, T.pfm")->required();
    encode->add_option("--width", en_width, "Override map width");
    encode->add_option("--height", en_height, "Override map height");
    encode->add_option("--delta", en_delta, "Castle radius");
    encode->add_option("--beta", en_beta, "Moat width");
    encode->add_option("--sigma", en_sigma, "Slope sigma");
    encode->add_option("--lambda", en_lambda, "Background plateau");
    encode->add_flag("--png", en_png, "Also write PNG previews");

    // loss
    auto* loss = app.add_subcommand("loss", "Loss terms of predicted maps against ground-truth maps");
    std::string lo_pred, lo_gt, lo_output;
    loss->add_option("--pred", lo_pred, "Directory with p_hat.pfm, d_hat.pfm, t_hat.pfm")->required()->check(CLI::ExistingDirectory);
    loss->add_option("--gt", lo_gt, "Directory with P.pfm, W.pfm, D.pfm, T.pfm")->required()->check(CLI::ExistingDirectory);
    loss->add_option("--output", lo_output, "Also write the JSON record to this file");

    // evaluate / pr-curve share their inputs
    struct EvalArgs {
        std::string extracted, gt, mask;
        int level = 0;
        std::optional<double> rho, theta;
        bool type_aware = false;
    };
    auto add_eval_args = [](CLI::App* sub, EvalArgs& a) {
        sub->add_option("--extracted", a.extracted, "Extracted minutiae file")->required()->check(CLI::ExistingFile);
        sub->add_option("--gt", a.gt, "Ground-truth minutiae file")->required()->check(CLI::ExistingFile);
        sub->add_option("--mask", a.mask, "Ridge-area mask image (crop and 14 px margin)")->check(CLI::ExistingFile);
        sub->add_option("--level", a.level, "Threshold level 0 (16 px, pi/6), 1 (12, pi/8), 2 (8, pi/10)");
        sub->add_option("--rho", a.rho, "Distance threshold override (px)");
        sub->add_option("--theta", a.theta, "Angle threshold override (rad)");
        sub->add_flag("--type-aware", a.type_aware, "Require matching minutia types");
    };
    auto* evaluate = app.add_subcommand("evaluate", "Pair extracted with ground-truth minutiae");
    EvalArgs ev;
    std::optional<double> ev_tau;
    std::string ev_output, ev_pairs;
    add_eval_args(evaluate, ev);
    evaluate->add_option("--tau", ev_tau, "Drop extracted minutiae with quality below tau");
    evaluate->add_option("--output", ev_output, "CSV with precision, recall and F1");
    evaluate->add_option("--pairs", ev_pairs, "CSV of matched pairs");

    auto* prcurve = app.add_subcommand("pr-curve", "Precision-recall curve over quality thresholds");
    EvalArgs pr;
    std::string pr_csv, pr_svg;
    add_eval_args(prcurve, pr);
    prcurve->add_option("--csv", pr_csv, "CSV of operating points")->required();
    prcurve->add_option("--svg", pr_svg, "SVG plot of the curve");

    // rank
    auto* rank = app.add_subcommand("rank", "Rank methods from per-method F1 CSVs");
    std::string rk_dir, rk_output, rk_rule = "competition";
    rank->add_option("--dir", rk_dir, "Directory of <method>.csv files with sample,f1 rows")->required();
    rank->add_option("--output-dir", rk_output, "Directory for summary.csv, direct_wins.csv, ranks.csv");
    rank->add_option("--tie-rule", rk_rule, "competition or average")->check(CLI::IsMember({"competition", "average"}));

    // inspect
    auto* inspect = app.add_subcommand("inspect", "PCA projections of internal activations");
    std::vector<std::string> in_images, in_taps;
    std::string in_weights, in_output;
    inspect->add_option("--image", in_images, "One or more images (pixels pooled for the PCA)")->required()->check(CLI::ExistingFile);
    inspect->add_option("--weights", in_weights, "Weight container")->envname("LEADER_WEIGHTS");
    inspect->add_option("--taps", in_taps, "Stage names, e.g. stem context.enc2 gate refine.dec_last")->required();
    inspect->add_option("--output-dir", in_output, "Directory for <tap>_<k>.png")->required();
    bool in_list = false;
    inspect->add_flag("--list", in_list, "Print the valid tap names and exit");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        throw UsageError(e.what());
    }

    const io::RunConfig cfg = load_config(config_path);

    if (extract->parsed()) {
        const Model model = load_model(ex_weights, cfg);
        const Tensor image = io::load_image(ex_image);
        if (image.channels() != 1) throw StructuralError("extract: image must be single-channel");
        const double tau = ex_tau.value_or(cfg.postprocess.tau_q);
        const ForwardResult r = model.forward(image);
        const MinutiaSet set = postprocess::extract_minutiae(r.maps.p_tilde, r.maps.d_hat, r.maps.t_hat, tau);
        io::write_minutiae(ex_output, set);
        if (!ex_maps.empty()) {
            ensure_dir(ex_maps);
            const fs::path d = ex_maps;
            io::save_image(d / "p_hat.pfm", r.maps.p_hat);
            io::save_image(d / "p_tilde.pfm", r.maps.p_tilde);
            io::save_image(d / "vx.pfm", r.maps.vx);
            io::save_image(d / "vy.pfm", r.maps.vy);
            io::save_image(d / "d_hat.pfm", r.maps.d_hat);
            io::save_image(d / "t_hat.pfm", r.maps.t_hat);
            io::save_image(d / "p_hat.png", r.maps.p_hat);
            io::save_image(d / "p_tilde.png", r.maps.p_tilde);
            io::save_image(d / "d_hat.png", angle_preview(r.maps.d_hat));
            io::save_image(d / "t_hat.png", r.maps.t_hat);
        }
        std::cout << "minutiae " << set.size() << " tau " << tau << "\n";
    } else if (encode->parsed()) {
        cmr::CmrParams p = cfg.cmr;
        if (en_delta) p.delta = *en_delta;
        if (en_beta) p.beta = *en_beta;
        if (en_sigma) p.sigma = *en_sigma;
        if (en_lambda) p.lambda = *en_lambda;
        const MinutiaSet gt = io::read_minutiae(en_minutiae);
        const std::size_t w = en_width.value_or(gt.width);
        const std::size_t h = en_height.value_or(gt.height);
        if (w == 0 || h == 0) throw StructuralError("encode-gt: map dimensions must be positive");
        const cmr::GroundTruthMaps maps = cmr::encode(gt, w, h, p);
        ensure_dir(en_output);
        const fs::path d = en_output;
        io::save_image(d / "P.pfm", maps.position);
        io::save_image(d / "W.pfm", maps.weight);
        io::save_image(d / "D.pfm", maps.direction);
        io::save_image(d / "T.pfm", maps.type);
        if (en_png) {
            io::save_image(d / "P.png", maps.position);
            io::save_image(d / "W.png", maps.weight);
            io::save_image(d / "D.png", angle_preview(maps.direction));
            io::save_image(d / "T.png", maps.type);
        }
        std::size_t positives = 0;
        for (float v : maps.position.values()) positives += v > 0.5f;
        std::cout << "maps " << w << "x" << h << " positive_pixels " << positives << "\n";
    } else if (loss->parsed()) {
        const fs::path pd = lo_pred, gd = lo_gt;
        const Tensor P = load_map(gd / "P.pfm"), W = load_map(gd / "W.pfm"), D = load_map(gd / "D.pfm"),
                     T = load_map(gd / "T.pfm");
        const Tensor p_hat = load_map(pd / "p_hat.pfm"), d_hat = load_map(pd / "d_hat.pfm"),
                     t_hat = load_map(pd / "t_hat.pfm");
        const losses::LossParts parts = losses::evaluate(P, W, D, T, p_hat, d_hat, t_hat, cfg.loss.epsilon);
        const double total = losses::composite_loss(parts, cfg.loss);
        const nlohmann::json rec = {{"position", parts.position},
                                    {"direction", parts.direction},
                                    {"type", parts.type},
                                    {"total", total},
                                    {"alpha", {cfg.loss.alpha_p, cfg.loss.alpha_d, cfg.loss.alpha_t}}};
        std::cout << rec.dump() << "\n";
        if (!lo_output.empty()) io::write_file_atomic(lo_output, rec.dump(2) + "\n");
    } else if (evaluate->parsed()) {
        const auto level = pick_level(ev.level, ev.rho, ev.theta);
        const EvalInputs in = load_eval_inputs(ev.extracted, ev.gt, ev.mask, ev_tau);
        const eval::MatchResult m = eval::pair_minutiae(in.extracted, in.gt, level, ev.type_aware);
        const eval::OperatingPoint op = eval::precision_recall_f1(m);
        const std::vector<io::CsvRow> rows{
            {"rho_t", "theta_t", "regime", "tp", "fp", "fn", "precision", "recall", "f1"},
            {io::csv_number(level.rho_t), io::csv_number(level.theta_t), ev.type_aware ? "type-aware" : "type-agnostic",
             std::to_string(op.tp), std::to_string(op.fp), std::to_string(op.fn), io::csv_number(op.precision),
             io::csv_number(op.recall), io::csv_number(op.f1)}};
        if (!ev_output.empty()) io::write_csv(ev_output, rows);
        if (!ev_pairs.empty()) {
            std::vector<io::CsvRow> pr{{"extracted", "gt", "distance", "angle"}};
            for (const auto& p : m.pairs) {
                pr.push_back({std::to_string(p.extracted), std::to_string(p.gt), io::csv_number(p.distance),
                              io::csv_number(p.angle)});
            }
            io::write_csv(ev_pairs, pr);
        }
        std::cout << io::format_csv(rows);
    } else if (prcurve->parsed()) {
        const auto level = pick_level(pr.level, pr.rho, pr.theta);
        const EvalInputs in = load_eval_inputs(pr.extracted, pr.gt, pr.mask, std::nullopt);
        const eval::PrCurve curve = eval::sweep_quality(in.extracted, in.gt, level, pr.type_aware);
        io::write_csv(pr_csv, operating_point_rows(curve.points));
        if (!pr_svg.empty()) {
            io::PlotSeries s;
            s.label = pr.type_aware ? "type-aware" : "type-agnostic";
            for (const auto& op : curve.points) s.points.emplace_back(op.recall, op.precision);
            io::write_file_atomic(pr_svg, io::unit_plot_svg({s}, "recall", "precision", "Precision-recall"));
        }
        std::cout << "best tau " << curve.best.tau << " precision " << curve.best.precision << " recall "
                  << curve.best.recall << " f1 " << curve.best.f1 << "\n";
    } else if (rank->parsed()) {
        const eval::F1Table table = read_f1_directory(rk_dir);
        const auto rule = rk_rule == "average" ? eval::TieRule::average : eval::TieRule::competition;
        const eval::RankingReport rep = eval::sample_ranking(table, rule);
        std::vector<io::CsvRow> summary{{"method", "mean_rank", "sd_rank", "t1_pct", "t3_pct", "bottom_half_pct"}};
        for (const auto& s : rep.summary) {
            summary.push_back({s.method, io::csv_number(s.mean_rank), io::csv_number(s.sd_rank), io::csv_number(s.top1),
                               io::csv_number(s.top3), io::csv_number(s.bottom_half)});
        }
        std::vector<io::CsvRow> wins{{"method"}};
        for (const auto& m : table.methods) wins.front().push_back(m);
        for (std::size_t i = 0; i < table.methods.size(); ++i) {
            io::CsvRow row{table.methods[i]};
            for (std::size_t j = 0; j < table.methods.size(); ++j)
                row.push_back(i == j ? "" : io::csv_number(rep.direct.percent(i, j)));
            wins.push_back(std::move(row));
        }
        if (!rk_output.empty()) {
            ensure_dir(rk_output);
            const fs::path d = rk_output;
            std::vector<io::CsvRow> ranks{{"sample"}};
            for (const auto& m : table.methods) ranks.front().push_back(m);
            for (std::size_t s = 0; s < table.sample_count(); ++s) {
                io::CsvRow row{table.samples[s]};
                for (std::size_t i = 0; i < table.methods.size(); ++i) row.push_back(io::csv_number(rep.ranks[i][s]));
                ranks.push_back(std::move(row));
            }
            io::write_csv(d / "summary.csv", summary);
            io::write_csv(d / "direct_wins.csv", wins);
            io::write_csv(d / "ranks.csv", ranks);
        }
        std::cout << io::format_csv(summary);
    } else if (inspect->parsed()) {
        const Model model = load_model(in_weights, cfg);
        if (in_list) {
            for (const auto& t : model.tap_names()) std::cout << t << "\n";
            return 0;
        }
        std::vector<std::map<std::string, Tensor>> per_image;
        for (const auto& path : in_images) per_image.push_back(model.forward(io::load_image(path), in_taps).taps);
        ensure_dir(in_output);
        for (const auto& tap : in_taps) {
            std::vector<Tensor> stack;
            for (const auto& taps : per_image) stack.push_back(taps.at(tap));
            const auto rgb = eval::pca_projection(stack);
            for (std::size_t k = 0; k < rgb.size(); ++k) {
                io::save_image(fs::path(in_output) / (tap + "_" + std::to_string(k) + ".png"), rgb[k]);
            }
        }
        std::cout << "taps " << in_taps.size() << " images " << in_images.size() << "\n";
    }
    return 0;
}

int fail(const char* kind, const std::string& message, int code) {
    std::string line = message;
    std::replace(line.begin(), line.end(), '\n', ' ');
    std::cerr << "error: " << kind << ": " << line << "\n";
    return code;
}

}  // namespace

int main(int argc, char** argv) {
    runtime::retain_freed_memory();
    try {
        return run(argc, argv);
    } catch (const UsageError& e) {
        return fail("usage", e.what(), 2);
    } catch (const io::CrcError& e) {
        return fail("crc", e.what(), 4);
    } catch (const io::TruncationError& e) {
        return fail("truncated", e.what(), 4);
    } catch (const io::DuplicateNameError& e) {
        return fail("duplicate-name", e.what(), 4);
    } catch (const io::FormatError& e) {
        return fail("format", e.what(), 4);
    } catch (const io::FileError& e) {
        return fail("io", e.what(), 3);
    } catch (const StructuralError& e) {
        return fail("structural", e.what(), 5);
    } catch (const NumericError& e) {
        return fail("numeric", e.what(), 6);
    } catch (const std::exception& e) {
        return fail("internal", e.what(), 1);
    }
}
