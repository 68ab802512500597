#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "mammopos/mammopos.hpp"

namespace fs = std::filesystem;
using namespace mammopos;

namespace {

void write_history_csv(const fs::path& path, const std::vector<EpochStats>& history) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("cannot write " + path.string());
    out << "epoch,train_loss,val_loss\n";
    for (const auto& e : history)
        out << e.epoch << "," << format_double(e.train_loss) << "," << format_double(e.val_loss)
            << "\n";
}

int run_gen_phantoms(const fs::path& out_dir, int n, std::uint64_t seed, double noise_sigma,
                     double diff_threshold_mm) {
    PhantomSpec proto;
    proto.noise_sigma = noise_sigma;
    proto.diff_threshold_mm = diff_threshold_mm;
    const auto rows = generate_dataset(out_dir, n, seed, proto);

    // MLO image/annotation pairs, ready for `train --data`.
    const fs::path train_manifest = out_dir / "train_mlo.txt";
    std::ofstream tm(train_manifest, std::ios::trunc);
    if (!tm) throw IoError("cannot write " + train_manifest.string());
    tm << "# image,annotation\n";
    for (const auto& row : rows) tm << row.mlo_image << "," << row.mlo_image << ".json\n";
    tm.close();

    std::cout << "wrote " << rows.size() << " cases to " << out_dir.string() << "\n";
    std::cout << "manifest " << (out_dir / "manifest.csv").string() << "\n";
    std::cout << "training manifest " << train_manifest.string() << "\n";
    return 0;
}

int run_train(const fs::path& data, const fs::path& checkpoint, fs::path history_path,
              const TrainConfig& cfg) {
    const auto dataset = load_training_set(data);
    const TrainResult result = train(dataset, cfg);

    if (checkpoint.has_parent_path()) fs::create_directories(checkpoint.parent_path());
    save_checkpoint(checkpoint, result.model);
    if (history_path.empty()) history_path = checkpoint.string() + ".history.csv";
    write_history_csv(history_path, result.history);

    std::cout << "trained " << cfg.epochs << " epochs on " << dataset.size() << " samples ("
              << result.val_indices.size() << " held out)\n";
    std::cout << "best epoch " << result.best_epoch << " val_loss "
              << format_double(result.best_val_loss) << "\n";
    std::cout << "checkpoint " << checkpoint.string() << "\n";
    std::cout << "history " << history_path.string() << "\n";
    return 0;
}

std::unique_ptr<MloPredictor> make_predictor(const std::string& mode, const fs::path& checkpoint) {
    if (mode == "passthrough") return std::make_unique<PassthroughPredictor>();
    if (mode != "trained") throw ValidationError("unknown predictor mode: " + mode);
    if (checkpoint.empty())
        throw ValidationError("--checkpoint is required with --predictor trained");
    return std::make_unique<TrainedPredictor>(TrainedPredictor::from_checkpoint(checkpoint));
}

int run_assess(const fs::path& study_root, const fs::path& out_dir, const std::string& mode,
               const fs::path& checkpoint, std::optional<double> spacing_override,
               const AssessConfig& cfg) {
    validate(cfg.decision);
    validate(cfg.bb);
    const auto predictor = make_predictor(mode, checkpoint);
    const auto dirs = find_subject_dirs(study_root);
    fs::create_directories(out_dir);

    for (const auto& dir : dirs) {
        SubjectStudy study = load_subject(dir);
        if (spacing_override)
            for (auto& v : study.views) v.image.spacing_mm_per_px = spacing_override;
        const AssessedSubject assessed = assess_subject(study, *predictor, cfg);

        const fs::path txt = out_dir / (study.subject + ".txt");
        std::ofstream out(txt, std::ios::trunc);
        if (!out) throw IoError("cannot write " + txt.string());
        out << assessed.text;
        out.close();
        save_report_json(out_dir / (study.subject + ".json"), assessed.report);

        std::cout << study.subject;
        for (const auto& d : assessed.decisions)
            std::cout << " " << (d.laterality == Laterality::Left ? "L:" : "R:")
                      << to_string(d.cc.verdict);
        std::cout << "\n";
    }
    std::cout << "assessed " << dirs.size() << " subjects -> " << out_dir.string() << "\n";
    return 0;
}

// Report-level MLO verdict: a chosen view exists iff some MLO passed the
// intersection rule.
Verdict mlo_verdict(const BreastSection& b) {
    return b.chosen_mlo ? Verdict::Adequate : Verdict::Inadequate;
}

int run_eval(const fs::path& dataset_root, const fs::path& reports_dir, const fs::path& checkpoint,
             const fs::path& out_dir) {
    if (reports_dir.empty() && checkpoint.empty())
        throw ValidationError("eval needs --reports and/or --checkpoint");
    const auto rows = read_manifest(dataset_root / "manifest.csv");
    fs::create_directories(out_dir);

    if (!reports_dir.empty()) {
        std::vector<Verdict> mlo_pred, mlo_truth, cc_pred, cc_truth;
        int detected_all = 0, total_bb = 0, detected_bb = 0;
        for (const auto& row : rows) {
            const StudyReport rep = load_report_json(reports_dir / (row.subject + ".json"));
            if (rep.breasts.size() != 1)
                throw ValidationError(row.subject + ": expected a single-breast report");
            const BreastSection& b = rep.breasts.front();
            mlo_pred.push_back(mlo_verdict(b));
            mlo_truth.push_back(row.mlo_label);
            cc_pred.push_back(b.verdict);
            cc_truth.push_back(row.cc_label);
            const bool has_cc_row = !b.cc_rows.empty();
            detected_all += has_cc_row ? 1 : 0;
            if (row.scenario != Scenario::BbMissing) {
                ++total_bb;
                detected_bb += has_cc_row ? 1 : 0;
            }
        }
        write_confusion_csv(out_dir / "confusion_mlo.csv", confusion(mlo_pred, mlo_truth));
        write_confusion_csv(out_dir / "confusion_cc.csv", confusion(cc_pred, cc_truth));

        std::ofstream det(out_dir / "detection.csv", std::ios::trunc);
        if (!det) throw IoError("cannot write " + (out_dir / "detection.csv").string());
        det << "population,detected,total,rate_percent\n";
        det << "all," << detected_all << "," << rows.size() << ","
            << format_percent(detection_rate(detected_all, static_cast<int>(rows.size()))) << "\n";
        if (total_bb > 0)
            det << "bb_present," << detected_bb << "," << total_bb << ","
                << format_percent(detection_rate(detected_bb, total_bb)) << "\n";
        det.close();
        std::cout << "confusion " << (out_dir / "confusion_mlo.csv").string() << ", "
                  << (out_dir / "confusion_cc.csv").string() << "\n";
        std::cout << "detection " << (out_dir / "detection.csv").string() << "\n";
    }

    if (!checkpoint.empty()) {
        const TrainedPredictor predictor = TrainedPredictor::from_checkpoint(checkpoint);
        std::vector<EndpointVector> preds, truths;
        for (const auto& row : rows) {
            const GrayImage img = load_image(dataset_root / row.mlo_image);
            const ViewAnnotation ann = load_annotation(dataset_root / (row.mlo_image + ".json"));
            preds.push_back(predictor.predict(img, std::nullopt));
            truths.push_back(passthrough_predictor(ann));
        }
        const auto errors = endpoint_errors(preds, truths);
        write_errors_csv(out_dir / "errors.csv", errors);
        write_error_summary_csv(out_dir / "error_summary.csv", errors);
        std::cout << "endpoint errors " << (out_dir / "errors.csv").string() << ", "
                  << (out_dir / "error_summary.csv").string() << "\n";
    }
    return 0;
}

int run_report(const fs::path& json_path, const fs::path& out_path) {
    const StudyReport rep = load_report_json(json_path);
    const std::string text = render_report(rep);
    if (out_path.empty()) {
        std::cout << text;
    } else {
        std::ofstream out(out_path, std::ios::trunc);
        if (!out) throw IoError("cannot write " + out_path.string());
        out << text;
        std::cout << "report " << out_path.string() << "\n";
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"mammogram positioning adequacy toolkit"};
    app.require_subcommand(1);
    app.set_config("--config", "",
                   "configuration file: [subcommand] sections with key = value lines");
    app.allow_config_extras(CLI::config_extras_mode::error);

    // gen-phantoms
    auto* gen = app.add_subcommand("gen-phantoms", "generate a labeled synthetic dataset");
    std::string gen_out;
    int gen_n = 100;
    std::uint64_t gen_seed = 0;
    double gen_noise = 0.01, gen_thr_mm = 10.0;
    gen->add_option("--out", gen_out, "dataset directory")->required();
    gen->add_option("--n", gen_n, "number of cases");
    gen->add_option("--seed", gen_seed, "master seed");
    gen->add_option("--noise-sigma", gen_noise, "gaussian noise sigma");
    gen->add_option("--diff-threshold-mm", gen_thr_mm, "PNL difference the scenarios encode");

    // train
    auto* tr = app.add_subcommand("train", "train the endpoint regressor");
    std::string tr_data, tr_out, tr_history, tr_layout = "shared";
    TrainConfig tr_cfg;
    bool tr_no_augment = false;
    tr->add_option("--data", tr_data, "training manifest (image,annotation per line)")->required();
    tr->add_option("--out", tr_out, "checkpoint path")->required();
    tr->add_option("--history", tr_history, "history CSV path (default: <out>.history.csv)");
    tr->add_option("--epochs", tr_cfg.epochs, "training epochs");
    tr->add_option("--batch-size", tr_cfg.batch_size, "minibatch size");
    tr->add_option("--lr", tr_cfg.learning_rate, "base learning rate");
    tr->add_option("--seed", tr_cfg.seed, "training seed");
    tr->add_option("--val-fraction", tr_cfg.validation_fraction, "held-out fraction");
    tr->add_option("--layout", tr_layout, "head layout: shared|separate");
    tr->add_flag("--no-augment", tr_no_augment, "disable training augmentation");

    // assess
    auto* as = app.add_subcommand("assess", "assess positioning for every subject in a study");
    std::string as_study, as_out, as_mode = "passthrough", as_ckpt, as_unit = "physical";
    AssessConfig as_cfg;
    double as_spacing = 0.0;
    as->add_option("--study", as_study, "study root (subject directories)")->required();
    as->add_option("--out", as_out, "output directory")->required();
    as->add_option("--predictor", as_mode, "passthrough|trained");
    as->add_option("--checkpoint", as_ckpt, "model checkpoint (trained mode)");
    as->add_option("--diff-threshold", as_cfg.decision.diff_threshold,
                   "PNL difference threshold (mm in physical mode, px in pixel mode)");
    as->add_option("--unit-mode", as_unit, "physical|pixel");
    as->add_option("--bb-distance-threshold", as_cfg.decision.bb_distance_threshold,
                   "BB-to-PNL distance warning threshold (px)");
    as->add_option("--bb-rmin", as_cfg.bb.r_min, "minimum BB radius (px)");
    as->add_option("--bb-rmax", as_cfg.bb.r_max, "maximum BB radius (px)");
    as->add_option("--bb-peak", as_cfg.bb.accumulator_peak_threshold,
                   "Hough accumulator peak threshold");
    as->add_option("--spacing-mm-per-px", as_spacing, "override pixel spacing for all views");

    // eval
    auto* ev = app.add_subcommand("eval", "score assessments and predictions against a manifest");
    std::string ev_dataset, ev_reports, ev_ckpt, ev_out;
    ev->add_option("--dataset", ev_dataset, "dataset root (holds manifest.csv)")->required();
    ev->add_option("--reports", ev_reports, "assess output directory to score");
    ev->add_option("--checkpoint", ev_ckpt, "checkpoint for endpoint-error metrics");
    ev->add_option("--out", ev_out, "metrics directory")->required();

    // report
    auto* rp = app.add_subcommand("report", "re-render a report from its JSON sidecar");
    std::string rp_json, rp_out;
    rp->add_option("--json", rp_json, "report sidecar path")->required();
    rp->add_option("--out", rp_out, "text output path (default: stdout)");

    try {
        app.parse(argc, argv);

        if (app.got_subcommand(gen))
            return run_gen_phantoms(gen_out, gen_n, gen_seed, gen_noise, gen_thr_mm);

        if (app.got_subcommand(tr)) {
            const auto layout = parse_head_layout(tr_layout);
            if (!layout) throw ValidationError("unknown layout: " + tr_layout);
            tr_cfg.layout = *layout;
            tr_cfg.augment_enabled = !tr_no_augment;
            return run_train(tr_data, tr_out, tr_history, tr_cfg);
        }

        if (app.got_subcommand(as)) {
            const auto unit = parse_unit_mode(as_unit);
            if (!unit) throw ValidationError("unknown unit mode: " + as_unit);
            as_cfg.decision.unit_mode = *unit;
            std::optional<double> spacing;
            if (as->count("--spacing-mm-per-px")) {
                if (!(as_spacing > 0.0)) throw ValidationError("spacing must be > 0");
                spacing = as_spacing;
            }
            return run_assess(as_study, as_out, as_mode, as_ckpt, spacing, as_cfg);
        }

        if (app.got_subcommand(ev)) return run_eval(ev_dataset, ev_reports, ev_ckpt, ev_out);
        if (app.got_subcommand(rp)) return run_report(rp_json, rp_out);

        throw ValidationError("no subcommand selected");
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    } catch (const std::exception& e) {
        std::cerr << "mammopos: " << e.what() << "\n";
        return 1;
    }
}
