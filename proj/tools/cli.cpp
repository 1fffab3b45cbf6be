#include "cli.hpp"

#include "segpipe/augment.hpp"
#include "segpipe/config.hpp"
#include "segpipe/dataset.hpp"
#include "segpipe/error.hpp"
#include "segpipe/grid_io.hpp"
#include "segpipe/image.hpp"
#include "segpipe/metrics.hpp"
#include "segpipe/optim.hpp"

#include <CLI11.hpp>
#include <spdlog/sinks/stdout_sinks.h>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <mutex>
#include <optional>
#include <ostream>

namespace segpipe::cli {

namespace fs = std::filesystem;

namespace {

void init_logging() {
    static std::once_flag once;
    std::call_once(once, [] {
        auto logger = std::make_shared<spdlog::logger>("segpipe", std::make_shared<spdlog::sinks::stderr_sink_mt>());
        logger->set_pattern("[%l] %v");
        spdlog::set_default_logger(logger);
    });
    spdlog::level::level_enum level = spdlog::level::info;
    if (const char* env = std::getenv("SEGPIPE_LOG")) {
        const std::string v = env;
        if (v == "error") level = spdlog::level::err;
        else if (v == "warn") level = spdlog::level::warn;
        else if (v == "info") level = spdlog::level::info;
        else if (v == "debug") level = spdlog::level::debug;
    }
    spdlog::set_level(level);
}

std::string fmt(const char* f, double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, f, v);
    return buf;
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out << text;
    if (!out) {
        throw Error(Errc::IoFailure, "cannot write " + path.string());
    }
}

// Options shared by every subcommand.
struct Common {
    std::string config;
    std::uint64_t seed = 42;
    unsigned jobs = 0;
    std::string out_dir;
    CLI::Option* seed_opt = nullptr;
    CLI::Option* jobs_opt = nullptr;

    void attach(CLI::App* app, bool out_dir_required) {
        app->add_option("--config", config, "JSON config file")->check(CLI::ExistingFile);
        seed_opt = app->add_option("--seed", seed, "Random seed");
        jobs_opt = app->add_option("--jobs", jobs, "Worker threads (0 = all cores)");
        auto* o = app->add_option("--out-dir", out_dir, "Output directory");
        if (out_dir_required) {
            o->required();
        }
    }

    PipelineConfig load() const {
        PipelineConfig c = config.empty() ? PipelineConfig{} : load_config(config);
        if (seed_opt->count() > 0) {
            c.seed = seed;
        }
        if (jobs_opt->count() > 0) {
            c.jobs = jobs;
        }
        return c;
    }
};

// ---------------------------------------------------------------------------

struct SplitArgs {
    Common common;
    std::string dataset_dir;
    std::optional<std::string> pattern;
    std::optional<double> train, val, test;
};

int cmd_split(const SplitArgs& a, std::ostream& out) {
    PipelineConfig c = a.common.load();
    if (!a.dataset_dir.empty()) {
        c.dataset_dir = a.dataset_dir;
    }
    if (c.dataset_dir.empty()) {
        throw Error(Errc::InvalidInput, "no dataset directory given");
    }
    if (a.pattern) c.patient_id_pattern = *a.pattern;
    if (a.train) c.ratios.train = *a.train;
    if (a.val) c.ratios.val = *a.val;
    if (a.test) c.ratios.test = *a.test;

    const std::vector<ImageRecord> records = load_dataset(c.dataset_dir, c.patient_id_pattern);
    const SplitAssignment split = stratified_patient_split(records, c.ratios, c.seed);
    const fs::path out_dir = a.common.out_dir;
    for (const auto name : kSplitNames) {
        fs::create_directories(out_dir / name / "images");
        fs::create_directories(out_dir / name / "labels");
    }

    struct Row {
        std::size_t patients = 0, images = 0;
        std::array<std::size_t, kNumClasses> counts{};
    };
    std::array<Row, 4> rows{};
    for (const auto& [patient, s] : split.patient_split) {
        ++rows[static_cast<int>(s)].patients;
        ++rows[3].patients;
    }
    for (const ImageRecord& r : records) {
        const Split s = split.patient_split.at(r.patient_id);
        const fs::path dst = out_dir / split_name(s);
        fs::copy_file(c.dataset_dir / "images" / (r.image_id + ".png"), dst / "images" / (r.image_id + ".png"),
                      fs::copy_options::overwrite_existing);
        const fs::path label = c.dataset_dir / "labels" / (r.image_id + ".txt");
        if (fs::exists(label)) {
            fs::copy_file(label, dst / "labels" / (r.image_id + ".txt"), fs::copy_options::overwrite_existing);
        }
        const auto counts = r.class_counts();
        for (Row* row : {&rows[static_cast<int>(s)], &rows[3]}) {
            ++row->images;
            for (int k = 0; k < kNumClasses; ++k) {
                row->counts[k] += counts[k];
            }
        }
    }
    write_split_manifest(split, records, out_dir);

    char line[160];
    std::snprintf(line, sizeof line, "%-7s %8s %8s %8s %8s %8s %8s\n", "Split", "Patients", "Images", "Brain", "CSP",
                  "LV", "Total");
    out << line;
    const char* labels[] = {"Train", "Val", "Test", "All"};
    for (int i = 0; i < 4; ++i) {
        const Row& r = rows[i];
        std::snprintf(line, sizeof line, "%-7s %8zu %8zu %8zu %8zu %8zu %8zu\n", labels[i], r.patients, r.images,
                      r.counts[0], r.counts[1], r.counts[2], r.counts[0] + r.counts[1] + r.counts[2]);
        out << line;
    }
    return kOk;
}

// ---------------------------------------------------------------------------

struct AugmentArgs {
    Common common;
    std::string train_dir;
    std::optional<double> alpha, min_overlap;
    std::optional<int> retries;
};

int cmd_augment(const AugmentArgs& a, std::ostream& out) {
    PipelineConfig c = a.common.load();
    if (a.alpha) c.augmentation.alpha = *a.alpha;
    if (a.min_overlap) c.augmentation.min_overlap = *a.min_overlap;
    if (a.retries) c.augmentation.retries = *a.retries;
    c.augmentation.jobs = c.jobs;
    if (!fs::is_directory(a.train_dir)) {
        throw Error(Errc::IoFailure, "train directory " + a.train_dir + " does not exist");
    }
    const AugmentationReport r = run_offline(a.train_dir, c.augmentation, c.seed);
    if (r.already_augmented) {
        out << "already augmented; no files written\n";
    }
    char line[160];
    std::snprintf(line, sizeof line, "%-6s %9s %9s %9s\n", "Class", "Attempts", "Accepted", "Rejected");
    out << line;
    for (const auto& [name, t] : {std::pair{"CSP", r.csp}, std::pair{"LV", r.lv}}) {
        std::snprintf(line, sizeof line, "%-6s %9zu %9zu %9zu\n", name, t.attempts, t.accepted, t.rejected);
        out << line;
    }
    std::snprintf(line, sizeof line, "%-6s %9zu %9zu %9zu\n", "All", r.attempts(), r.accepted(), r.rejected());
    out << line;
    out << "acceptors " << r.acceptors << ", augmented images " << r.augmented_images << "\n";
    return kOk;
}

// ---------------------------------------------------------------------------

struct LosscheckArgs {
    Common common;
    int trials = 100;
    int size = 8;
    bool inject_fault = false;
    std::string logits, target;
    int class_id = 0;
};

int cmd_losscheck(const LosscheckArgs& a, std::ostream& out) {
    const PipelineConfig c = a.common.load();
    if (!a.logits.empty() || !a.target.empty()) {
        if (a.logits.empty() || a.target.empty()) {
            throw Error(Errc::InvalidInput, "--logits and --target go together");
        }
        const Grid lg = read_grid(a.logits);
        const Grid tg = read_grid(a.target);
        if (lg.width != tg.width || lg.height != tg.height) {
            throw Error(Errc::ShapeMismatch, "logits and target grids differ in size");
        }
        LossInput in;
        in.logits = LogitGrid(lg.width, lg.height);
        in.logits.values = lg.values;
        in.target = BinaryMask(tg.width, tg.height);
        for (int row = 0; row < tg.height; ++row) {
            for (int col = 0; col < tg.width; ++col) {
                const double v = tg.values[static_cast<std::size_t>(row) * tg.width + col];
                if (v != 0.0 && v != 1.0) {
                    throw Error(Errc::InvalidInput, "target values must be 0 or 1");
                }
                in.target.set(col, row, v == 1.0);
            }
        }
        in.class_id = a.class_id;
        out << composite_loss(in, c.loss).to_json(true);
        return kOk;
    }
    if (a.trials < 1) {
        throw Error(Errc::InvalidInput, "--trials must be at least 1");
    }
    LosscheckOptions opt;
    opt.trials = a.trials;
    opt.seed = c.seed;
    opt.size = a.size;
    opt.inject_fault = a.inject_fault;
    const auto rows = run_losscheck(opt, c.loss);
    bool ok = true;
    char line[160];
    std::snprintf(line, sizeof line, "%-10s %14s %10s %6s\n", "Component", "MaxRelErr", "Tolerance", "Status");
    out << line;
    for (const auto& r : rows) {
        std::snprintf(line, sizeof line, "%-10s %14.3e %10.0e %6s\n", r.component.c_str(), r.max_relative_error,
                      r.tolerance, r.passed ? "PASS" : "FAIL");
        out << line;
        ok = ok && r.passed;
    }
    out << a.trials << " trials, seed " << c.seed << "\n";
    return ok ? kOk : kInternal;
}

// ---------------------------------------------------------------------------

struct OptdemoArgs {
    Common common;
    std::string problem = "quadratic";
    std::string optimizer = "auto";
    std::int64_t epochs = 300, n_train = 2654, batch = 16, n_classes = 3;
    int steps = 200;
    std::optional<double> lr;
    std::vector<int> restarts;
};

int cmd_optdemo(const OptdemoArgs& a, std::ostream& out) {
    const PipelineConfig c = a.common.load();
    const ToyProblem problem = parse_toy_problem(a.problem);
    OptimizerChoice choice;
    if (a.optimizer == "auto") {
        choice = select_optimizer(a.epochs, a.n_train, a.batch, a.n_classes);
        out << optimizer_name(choice.kind) << " lr=" << fmt("%.4g", choice.learning_rate) << " (I=" << choice.iterations
            << (choice.kind == OptimizerKind::MuSGD ? " > " : " <= ") << kMuSGDIterationThreshold << ")\n";
    } else if (a.optimizer == "musgd" || a.optimizer == "MuSGD") {
        choice = {OptimizerKind::MuSGD, 0.01, 0.9, 0};
    } else if (a.optimizer == "adamw" || a.optimizer == "AdamW") {
        choice = {OptimizerKind::AdamW, 0.01, 0.9, 0};
    } else {
        throw Error(Errc::InvalidInput, "unknown optimizer '" + a.optimizer + "'");
    }
    if (a.lr) {
        choice.learning_rate = *a.lr;
    }
    if (a.steps < 1 || a.epochs < 1) {
        throw Error(Errc::InvalidInput, "--steps and --epochs must be positive");
    }
    auto opt = make_optimizer(choice);
    const std::vector<double> losses = toy_train(problem, *opt, a.steps, c.seed);

    std::string loss_csv = "step,loss\n";
    for (std::size_t i = 0; i < losses.size(); ++i) {
        loss_csv += std::to_string(i) + "," + fmt("%.17g", losses[i]) + "\n";
    }
    const LrSchedule schedule{choice.learning_rate, 0.0, static_cast<int>(a.epochs), a.restarts};
    std::string lr_csv = "epoch,lr\n";
    for (std::int64_t e = 0; e <= a.epochs; ++e) {
        lr_csv += std::to_string(e) + "," + fmt("%.17g", lr_at(schedule, static_cast<double>(e))) + "\n";
    }
    out << toy_problem_name(problem) << " " << opt->name() << ": loss " << fmt("%.6g", losses.front()) << " -> "
        << fmt("%.6g", losses.back()) << " after " << a.steps << " steps\n";
    if (a.common.out_dir.empty()) {
        out << loss_csv;
    } else {
        const fs::path dir = a.common.out_dir;
        fs::create_directories(dir);
        write_text(dir / "loss.csv", loss_csv);
        write_text(dir / "lr.csv", lr_csv);
    }
    return kOk;
}

// ---------------------------------------------------------------------------

struct EvaluateArgs {
    Common common;
    std::string gt_dir;
    std::string predictions;
    bool penalize_misses = false;
};

ImageSizes discover_sizes(const fs::path& gt_dir) {
    const fs::path sidecar = gt_dir / "image_sizes.json";
    if (fs::exists(sidecar)) {
        return read_image_sizes(sidecar);
    }
    ImageSizes sizes;
    const fs::path images = gt_dir / "images";
    if (!fs::is_directory(images)) {
        throw Error(Errc::IoFailure, "neither " + sidecar.string() + " nor " + images.string() + " exists");
    }
    for (const auto& entry : fs::directory_iterator(images)) {
        if (entry.path().extension() == ".png") {
            sizes[entry.path().stem().string()] = read_png_size(entry.path());
        }
    }
    return sizes;
}

int cmd_evaluate(const EvaluateArgs& a, std::ostream& out) {
    const PipelineConfig c = a.common.load();
    const fs::path gt_dir = a.gt_dir;
    const ImageSizes sizes = discover_sizes(gt_dir);
    const auto gts = load_ground_truth(gt_dir / "labels", sizes);
    const auto dets = read_predictions(a.predictions, sizes);
    std::vector<std::string> universe;
    for (const auto& [id, wh] : sizes) {
        universe.push_back(id);
    }
    EvalOptions opt;
    opt.thresholds = c.evaluation.iou_thresholds;
    opt.confusion_threshold = c.evaluation.confusion_threshold;
    opt.penalize_misses = a.penalize_misses || c.evaluation.penalize_misses;
    const MetricsReport report = evaluate(dets, gts, universe, opt);

    const fs::path dir = a.common.out_dir;
    fs::create_directories(dir);
    write_text(dir / "report.json", report.to_json());
    write_text(dir / "report.txt", report.to_text());
    write_text(dir / "ap_per_threshold.csv", report.to_ap_csv());
    out << report.to_text();
    return kOk;
}

int exit_code_for(Errc code) {
    switch (code) {
        case Errc::IoFailure: return kIo;
        case Errc::InvariantViolation: return kInternal;
        default: return kValidation;
    }
}

}  // namespace

LossInput random_loss_input(Rng& rng, int size) {
    LossInput in;
    in.logits = LogitGrid(size, size);
    for (double& v : in.logits.values) {
        v = 2.0 * rng.normal();
    }
    in.target = BinaryMask(size, size);
    const double density = rng.uniform(0.1, 0.9);
    for (int row = 0; row < size; ++row) {
        for (int col = 0; col < size; ++col) {
            in.target.set(col, row, rng.uniform() < density);
        }
    }
    in.class_id = static_cast<int>(rng.uniform_index(kNumClasses));
    return in;
}

std::vector<LosscheckRow> run_losscheck(const LosscheckOptions& options, const LossWeights& weights) {
    struct Component {
        const char* name;
        double tolerance;
        LossFn fn;
    };
    std::vector<Component> components{
        {"bce", 1e-4, [](const LossInput& in) { return bce(in.logits, in.target); }},
        {"dice", 1e-4, [&](const LossInput& in) { return dice_loss(in.logits, in.target, weights.epsilon); }},
        {"lovasz", 1e-3, [](const LossInput& in) { return lovasz_hinge(in.logits, in.target); }},
        {"composite", 1e-3,
         [&](const LossInput& in) {
             LossValue v = composite_loss(in, weights);
             return LossTerm{v.total, std::move(v.gradient)};
         }},
    };
    if (options.inject_fault) {
        for (Component& c : components) {
            c.fn = [inner = c.fn](const LossInput& in) {
                LossTerm t = inner(in);
                for (double& g : t.gradient) {
                    g = -g;
                }
                return t;
            };
        }
    }
    std::vector<LosscheckRow> rows;
    for (const Component& c : components) {
        rows.push_back({c.name, 0.0, c.tolerance, true});
    }
    Rng rng(derive_seed(options.seed, "losscheck"));
    for (int t = 0; t < options.trials; ++t) {
        const LossInput in = random_loss_input(rng, options.size);
        for (std::size_t k = 0; k < components.size(); ++k) {
            const GradcheckResult r = gradcheck(components[k].fn, in);
            rows[k].max_relative_error = std::max(rows[k].max_relative_error, r.max_relative_error);
        }
    }
    for (LosscheckRow& r : rows) {
        r.passed = r.max_relative_error <= r.tolerance;
    }
    return rows;
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    init_logging();
    CLI::App app{"Fetal head ultrasound segmentation pipeline tools", "segpipe"};
    app.require_subcommand(1);

    SplitArgs split;
    auto* s = app.add_subcommand("split", "Inter-patient stratified train/val/test split");
    split.common.attach(s, true);
    s->add_option("--dataset-dir", split.dataset_dir, "Directory with images/ and labels/");
    s->add_option("--pattern", split.pattern, "Regex with one capture group for the patient id");
    s->add_option("--train", split.train, "Train ratio");
    s->add_option("--val", split.val, "Validation ratio");
    s->add_option("--test", split.test, "Test ratio");

    AugmentArgs aug;
    auto* g = app.add_subcommand("augment", "Offline domain-guided copy-paste on a train split");
    aug.common.attach(g, false);
    g->add_option("train_dir,--train-dir", aug.train_dir, "Train split directory")->required();
    g->add_option("--alpha", aug.alpha, "Donor blend weight");
    g->add_option("--min-overlap", aug.min_overlap, "Minimum fraction of the structure inside the brain");
    g->add_option("--retries", aug.retries, "Paste attempts per structure class and acceptor");

    LosscheckArgs lc;
    auto* l = app.add_subcommand("losscheck", "Finite-difference gradient checks of the loss terms");
    lc.common.attach(l, false);
    l->add_option("--trials", lc.trials, "Random instances")->capture_default_str();
    l->add_option("--size", lc.size, "Grid side length")->capture_default_str()->check(CLI::Range(2, 64));
    l->add_flag("--inject-fault", lc.inject_fault)->group("");
    l->add_option("--logits", lc.logits, "Logit grid (.csv or binary)");
    l->add_option("--target", lc.target, "Target grid of 0/1 values");
    l->add_option("--class", lc.class_id, "Class id for the class weight")->check(CLI::Range(0, kNumClasses - 1));

    OptdemoArgs od;
    auto* o = app.add_subcommand("optdemo", "Optimizer selection and toy convergence runs");
    od.common.attach(o, false);
    o->add_option("--problem", od.problem, "quadratic, least_squares or logistic")->capture_default_str();
    o->add_option("--optimizer", od.optimizer, "auto, musgd or adamw")->capture_default_str();
    o->add_option("--epochs", od.epochs)->capture_default_str();
    o->add_option("--n-train", od.n_train)->capture_default_str();
    o->add_option("--batch", od.batch)->capture_default_str();
    o->add_option("--classes", od.n_classes)->capture_default_str();
    o->add_option("--steps", od.steps, "Toy optimization steps")->capture_default_str();
    o->add_option("--lr", od.lr, "Override the learning rate");
    o->add_option("--restarts", od.restarts, "Warm restart epochs for the LR curve");

    EvaluateArgs ev;
    auto* e = app.add_subcommand("evaluate", "COCO-style evaluation of polygon predictions");
    ev.common.attach(e, true);
    e->add_option("--gt-dir", ev.gt_dir, "Directory with labels/ and image_sizes.json or images/")->required();
    e->add_option("--predictions", ev.predictions, "JSON Lines predictions")->required();
    e->add_flag("--penalize-misses", ev.penalize_misses, "Count unmatched ground truths as zero overlap");

    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return kOk;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return kOk;
    } catch (const CLI::ParseError& ex) {
        err << "error: " << ex.what() << "\n";
        return kValidation;
    }

    try {
        if (*s) return cmd_split(split, out);
        if (*g) return cmd_augment(aug, out);
        if (*l) return cmd_losscheck(lc, out);
        if (*o) return cmd_optdemo(od, out);
        if (*e) return cmd_evaluate(ev, out);
    } catch (const Error& ex) {
        err << "error: " << ex.what() << "\n";
        return exit_code_for(ex.code());
    } catch (const fs::filesystem_error& ex) {
        err << "error: " << ex.what() << "\n";
        return kIo;
    } catch (const std::exception& ex) {
        err << "internal error: " << ex.what() << "\n";
        return kInternal;
    }
    return kValidation;
}

}  // namespace segpipe::cli
