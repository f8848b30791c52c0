#include "wafertex/commands.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <iostream>
#include <map>
#include <stdexcept>
#include <system_error>

#include "wafertex/complexity.hpp"
#include "wafertex/config.hpp"
#include "wafertex/fusion.hpp"
#include "wafertex/gradcheck.hpp"
#include "wafertex/image_io.hpp"
#include "wafertex/metrics.hpp"
#include "wafertex/mptce.hpp"
#include "wafertex/muse.hpp"
#include "wafertex/parallel.hpp"
#include "wafertex/records.hpp"
#include "wafertex/synthgen.hpp"

namespace wafertex {

namespace fs = std::filesystem;

namespace {

std::string fixed6(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.6f", v);
    return buf;
}

// Aligned "key = value" lines.
class Report {
public:
    void add(std::string key, std::string value) { rows_.emplace_back(std::move(key), std::move(value)); }
    void add(std::string key, double value) { add(std::move(key), fixed6(value)); }
    void add_count(std::string key, std::uint64_t value) { add(std::move(key), std::to_string(value)); }

    std::string str() const {
        std::size_t width = 0;
        for (const auto& [k, v] : rows_) width = std::max(width, k.size());
        std::string out;
        for (const auto& [k, v] : rows_) out += k + std::string(width - k.size(), ' ') + " = " + v + "\n";
        return out;
    }

private:
    std::vector<std::pair<std::string, std::string>> rows_;
};

Config load_config(const CommandArgs& args, std::initializer_list<std::string_view> allowed) {
    Config cfg = args.config.empty() ? Config{} : Config::load(args.config, allowed);
    std::string text;
    for (const auto& o : args.overrides) text += o + "\n";
    const Config extra = Config::parse(text, allowed, "--set");
    for (const auto& [k, v] : extra.values()) cfg.set(k, v);
    return cfg;
}

void require_inputs(const CommandArgs& args, std::size_t min, std::size_t max, const char* usage) {
    if (args.inputs.size() < min || args.inputs.size() > max) {
        throw std::invalid_argument(args.name + ": expected " + usage);
    }
}

std::size_t positive(std::uint64_t v, const char* key) {
    if (v == 0) throw std::invalid_argument(std::string(key) + " must be positive");
    return static_cast<std::size_t>(v);
}

bool is_tensor_file(const fs::path& p) { return p.extension() == ".wtns"; }

// A single-channel PFM, or the first tensor of a WTNS container.
Tensor read_features(const fs::path& p) {
    if (!is_tensor_file(p)) return read_pfm(p);
    auto all = read_tensors(p);
    if (all.empty()) throw std::invalid_argument(p.string() + ": tensor file holds no tensors");
    return std::move(all.front().second);
}

// ---- gen -------------------------------------------------------------------

const char* waveform_name(Waveform w) { return w == Waveform::sine ? "sine" : "square"; }

const char* kind_name(AnomalyKind k) {
    switch (k) {
        case AnomalyKind::disk: return "disk";
        case AnomalyKind::scratch: return "scratch";
        case AnomalyKind::contamination: return "contamination";
    }
    return "?";
}

GratingSpec grating_from(const Config& cfg, const std::string& prefix) {
    GratingSpec g;
    g.period = cfg.get_double(prefix + ".period", g.period);
    g.orientation = cfg.get_double(prefix + ".orientation", g.orientation);
    g.amplitude = cfg.get_double(prefix + ".amplitude", g.amplitude);
    g.phase = cfg.get_double(prefix + ".phase", g.phase);
    const std::string wave = cfg.get_string(prefix + ".waveform", "sine");
    if (wave == "sine") g.waveform = Waveform::sine;
    else if (wave == "square") g.waveform = Waveform::square;
    else throw std::invalid_argument(prefix + ".waveform must be sine or square");
    return g;
}

std::vector<SceneSpec> scenes_from(const Config& cfg) {
    if (cfg.get_bool("suite", false)) return standard_suite(positive(cfg.get_uint("suite_size", 256), "suite_size"));

    SceneSpec base;
    base.height = positive(cfg.get_uint("height", 256), "height");
    base.width = positive(cfg.get_uint("width", 256), "width");
    base.noise_sigma = cfg.get_double("noise_sigma", 0.01);
    const std::uint64_t seed = cfg.get_uint("seed", 0);
    const std::uint64_t gratings = cfg.get_uint("gratings", 1);
    if (gratings > 2) throw std::invalid_argument("gratings must be 0, 1 or 2");
    for (std::uint64_t g = 0; g < gratings; ++g) {
        base.gratings.push_back(grating_from(cfg, "grating" + std::to_string(g + 1)));
    }
    const std::string kind = cfg.get_string("anomaly.kind", "disk");
    if (kind != "none") {
        AnomalySpec a;
        if (kind == "disk") a.kind = AnomalyKind::disk;
        else if (kind == "scratch") a.kind = AnomalyKind::scratch;
        else if (kind == "contamination") a.kind = AnomalyKind::contamination;
        else throw std::invalid_argument("anomaly.kind must be none, disk, scratch or contamination");
        a.cx = cfg.get_double("anomaly.cx", 0.5 * static_cast<double>(base.width));
        a.cy = cfg.get_double("anomaly.cy", 0.5 * static_cast<double>(base.height));
        a.radius = cfg.get_double("anomaly.radius", kind == "disk" ? 6.0 : 0.0);
        a.length = cfg.get_double("anomaly.length", 40.0);
        a.thickness = cfg.get_double("anomaly.thickness", 2.0);
        a.angle = cfg.get_double("anomaly.angle", 0.0);
        a.contrast = cfg.get_double("anomaly.contrast", 0.5);
        a.softness = cfg.get_double("anomaly.softness", 3.0);
        if (cfg.has("anomaly.class_id")) {
            const auto id = cfg.get_int("anomaly.class_id", 0);
            if (id < 0 || id >= static_cast<std::int64_t>(kDefectClasses.size())) {
                throw std::invalid_argument("anomaly.class_id out of range");
            }
            a.class_id = static_cast<int>(id);
        }
        base.anomalies.push_back(a);
    }
    const std::size_t count = positive(cfg.get_uint("count", 1), "count");
    std::vector<SceneSpec> out(count, base);
    for (std::size_t i = 0; i < count; ++i) out[i].seed = seed + i;
    return out;
}

std::string spec_echo(const std::string& id, const SceneSpec& s) {
    Report r;
    r.add_count(id + ".height", s.height);
    r.add_count(id + ".width", s.width);
    r.add_count(id + ".seed", s.seed);
    r.add(id + ".noise_sigma", s.noise_sigma);
    for (std::size_t g = 0; g < s.gratings.size(); ++g) {
        const std::string p = id + ".grating" + std::to_string(g + 1);
        r.add(p + ".period", s.gratings[g].period);
        r.add(p + ".orientation", s.gratings[g].orientation);
        r.add(p + ".amplitude", s.gratings[g].amplitude);
        r.add(p + ".phase", s.gratings[g].phase);
        r.add(p + ".waveform", waveform_name(s.gratings[g].waveform));
    }
    for (std::size_t a = 0; a < s.anomalies.size(); ++a) {
        const auto& an = s.anomalies[a];
        const std::string p = id + ".anomaly" + std::to_string(a + 1);
        r.add(p + ".kind", kind_name(an.kind));
        r.add(p + ".cx", an.cx);
        r.add(p + ".cy", an.cy);
        r.add(p + ".radius", an.radius);
        r.add(p + ".length", an.length);
        r.add(p + ".thickness", an.thickness);
        r.add(p + ".angle", an.angle);
        r.add(p + ".contrast", an.contrast);
        r.add(p + ".softness", an.softness);
        r.add_count(p + ".class_id", static_cast<std::uint64_t>(an.class_id.value_or(default_class(an.kind))));
    }
    return r.str();
}

std::string scene_id(std::size_t i) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "scene_%03zu", i);
    return buf;
}

void cmd_gen(const CommandArgs& args) {
    const Config cfg = load_config(
        args, {"height", "width", "seed", "noise_sigma", "count", "suite", "suite_size", "gratings",
               "grating1.period", "grating1.orientation", "grating1.amplitude", "grating1.phase", "grating1.waveform",
               "grating2.period", "grating2.orientation", "grating2.amplitude", "grating2.phase", "grating2.waveform",
               "anomaly.kind", "anomaly.cx", "anomaly.cy", "anomaly.radius", "anomaly.length", "anomaly.thickness",
               "anomaly.angle", "anomaly.contrast", "anomaly.softness", "anomaly.class_id"});
    require_inputs(args, 0, 0, "no input files");
    const std::vector<SceneSpec> specs = scenes_from(cfg);
    std::vector<std::vector<DetectionRecord>> records(specs.size());
    parallel_for(specs.size(), args.threads, [&](std::size_t i) {
        const Scene scene = gen_scene(specs[i]);
        const std::string id = scene_id(i);
        write_pfm(args.out_dir / (id + ".pfm"), scene.image);
        write_heatmap(args.out_dir / (id + ".pgm"), scene.image);
        write_mask_pgm(args.out_dir / (id + "_mask.pgm"), scene.mask);
        for (const auto& gt : scene.ground_truth) records[i].push_back({id, gt});
    });
    std::vector<DetectionRecord> all;
    std::string echo;
    for (std::size_t i = 0; i < specs.size(); ++i) {
        all.insert(all.end(), records[i].begin(), records[i].end());
        echo += spec_echo(scene_id(i), specs[i]);
    }
    write_records(args.out_dir / "gt.txt", all);
    write_file_atomic(args.out_dir / "spec.txt", echo);
}

// ---- enhance ---------------------------------------------------------------

MptceConfig mptce_from(const Config& cfg) {
    MptceConfig m;
    m.top_k = static_cast<std::size_t>(cfg.get_uint("top_k", m.top_k));
    m.include_dc = cfg.get_bool("include_dc", m.include_dc);
    m.tile = static_cast<std::size_t>(cfg.get_uint("tile", m.tile));
    m.alpha = static_cast<float>(cfg.get_double("alpha", m.alpha));
    m.bca_conv = MptceConfig::box_attention_conv(static_cast<float>(cfg.get_double("bca_bias", 0.0)));
    const std::string grad = cfg.get_string("gradient", "sobel");
    if (grad == "sobel") m.gradient = GradientKernel::sobel;
    else if (grad == "central") m.gradient = GradientKernel::central_difference;
    else throw std::invalid_argument("gradient must be sobel or central");
    m.validate();
    return m;
}

void cmd_enhance(const CommandArgs& args) {
    const Config cfg = load_config(args, {"top_k", "include_dc", "tile", "alpha", "bca_bias", "gradient",
                                          "write_disturbance", "write_attention", "write_heatmap", "detect",
                                          "detect_k_sigma", "detect_min_area", "detect_class"});
    require_inputs(args, 1, SIZE_MAX, "one or more input images");
    const MptceConfig m = mptce_from(cfg);
    const bool write_d = cfg.get_bool("write_disturbance", true);
    const bool write_a = cfg.get_bool("write_attention", true);
    const bool write_h = cfg.get_bool("write_heatmap", true);
    const bool detect = cfg.get_bool("detect", true);
    const double k_sigma = cfg.get_double("detect_k_sigma", 4.0);
    const std::size_t min_area = static_cast<std::size_t>(cfg.get_uint("detect_min_area", 4));
    const auto detect_class = cfg.get_int("detect_class", 2);
    if (detect_class < 0) throw std::invalid_argument("detect_class must be >= 0");

    // Parallel across images when there are several, across channels otherwise.
    const std::size_t inner = args.inputs.size() == 1 ? args.threads : 1;
    std::vector<std::vector<DetectionRecord>> records(args.inputs.size());
    parallel_for(args.inputs.size(), args.inputs.size() == 1 ? 1 : args.threads, [&](std::size_t i) {
        const fs::path& in = args.inputs[i];
        const std::string stem = in.stem().string();
        if (is_tensor_file(in)) {
            NamedTensors outs;
            for (auto& [name, t] : read_tensors(in)) outs.emplace_back(name, mptce_enhance(t, m, inner));
            write_tensors(args.out_dir / (stem + "_enhanced.wtns"), outs);
            return;
        }
        const Tensor f = read_pfm(in);
        const MptceResult r = mptce_run(f, m, inner);
        write_pfm(args.out_dir / (stem + "_enhanced.pfm"), r.enhanced);
        if (write_d) write_pfm(args.out_dir / (stem + "_disturbance.pfm"), r.disturbance);
        if (write_a) write_pfm(args.out_dir / (stem + "_attention.pfm"), r.attention);
        if (write_h) write_heatmap(args.out_dir / (stem + "_disturbance.pgm"), r.disturbance);
        if (detect) {
            for (auto& d : disturbance_detections(r.disturbance, k_sigma, min_area, static_cast<int>(detect_class))) {
                records[i].push_back({stem, std::move(d)});
            }
        }
    });
    if (detect) {
        std::vector<DetectionRecord> all;
        for (auto& r : records) all.insert(all.end(), r.begin(), r.end());
        write_records(args.out_dir / "predictions.txt", all);
    }
}

// ---- muse / fuse -------------------------------------------------------------

NamedTensors conv_tensors(const std::string& prefix, const ConvSpec& c) {
    NamedTensors out;
    out.emplace_back(prefix + ".weight",
                     Tensor(c.out_channels, c.in_channels / c.groups, c.kernel_h * c.kernel_w, c.weights));
    if (c.has_bias()) out.emplace_back(prefix + ".bias", Tensor(1, 1, c.out_channels, c.bias));
    return out;
}

void cmd_muse(const CommandArgs& args) {
    const Config cfg = load_config(args, {"out_channels", "seed", "se_groups", "projection"});
    require_inputs(args, 1, 1, "one feature file (.pfm or .wtns)");
    const Tensor x = read_features(args.inputs.front());
    MuseBlock block = MuseBlock::seeded(x.channels(), positive(cfg.get_uint("out_channels", 2 * x.channels()),
                                                                "out_channels"),
                                        cfg.get_uint("seed", 0), static_cast<std::size_t>(cfg.get_uint("se_groups", 0)));
    if (cfg.get_bool("projection", false)) {
        block.projection = ConvSpec::seeded(block.context_channels(), x.channels(), 1, 1, cfg.get_uint("seed", 0) + 3);
    }
    block.validate();
    const Tensor y = muse_forward(x, block);
    write_tensors(args.out_dir / (args.inputs.front().stem().string() + "_muse.wtns"), {{"muse", y}});
    NamedTensors weights;
    for (auto& t : conv_tensors("local", block.local)) weights.push_back(std::move(t));
    for (auto& t : conv_tensors("surround", block.surround)) weights.push_back(std::move(t));
    for (auto& t : conv_tensors("se", block.se_conv)) weights.push_back(std::move(t));
    if (block.projection) {
        for (auto& t : conv_tensors("projection", *block.projection)) weights.push_back(std::move(t));
    }
    write_tensors(args.out_dir / "muse_weights.wtns", weights);
}

void cmd_fuse(const CommandArgs& args) {
    const Config cfg = load_config(args, {"mode", "upsample_factor", "combine", "seed", "out_channels"});
    const std::string mode = cfg.get_string("mode", "p2");
    const std::uint64_t seed = cfg.get_uint("seed", 0);
    Tensor fused;
    if (mode == "p2") {
        require_inputs(args, 2, 2, "two feature files: high-resolution, then coarse");
        const Tensor c2 = read_features(args.inputs[0]);
        const Tensor p3 = read_features(args.inputs[1]);
        FusionConfig f;
        const std::string combine = cfg.get_string("combine", "add");
        if (combine == "add") f.combine = CombineMode::add;
        else if (combine == "concat") f.combine = CombineMode::concat;
        else throw std::invalid_argument("combine must be add or concat");
        f.upsample_factor = positive(cfg.get_uint("upsample_factor", 1), "upsample_factor");
        const std::size_t out = positive(cfg.get_uint("out_channels", p3.channels()), "out_channels");
        f.align_conv = ConvSpec::seeded(c2.channels(), out, 1, 1, seed);
        fused = p2_fuse(c2, p3, f);
    } else if (mode == "tri_sum" || mode == "tri_concat" || mode == "tri_project") {
        require_inputs(args, 3, 3, "three feature files: geometric, contextual, texture");
        const Tensor a = read_features(args.inputs[0]);
        const Tensor b = read_features(args.inputs[1]);
        const Tensor c = read_features(args.inputs[2]);
        if (mode == "tri_project") {
            const std::size_t in = a.channels() + b.channels() + c.channels();
            const std::size_t out = positive(cfg.get_uint("out_channels", a.channels()), "out_channels");
            fused = tri_domain_fuse(a, b, c, ConvSpec::seeded(in, out, 1, 1, seed));
        } else {
            fused = tri_domain_fuse(a, b, c, mode == "tri_sum" ? TriFuseMode::sum : TriFuseMode::concat);
        }
    } else {
        throw std::invalid_argument("mode must be p2, tri_sum, tri_concat or tri_project");
    }
    write_tensors(args.out_dir / "fused.wtns", {{"fused", fused}});
}

// ---- eval ------------------------------------------------------------------

void cmd_eval(const CommandArgs& args, bool use_mask) {
    const Config cfg = load_config(args, {"num_classes", "conf_threshold", "dump"});
    if (args.inputs.size() < 2 || args.inputs.size() % 2 != 0) {
        throw std::invalid_argument(args.name +
                                    ": expected predictions and ground-truth files, then optional score-map/mask pairs");
    }
    const std::size_t num_classes = positive(cfg.get_uint("num_classes", kDefectClasses.size()), "num_classes");
    const double conf = cfg.get_double("conf_threshold", 0.0);
    const auto preds = read_records(args.inputs[0]);
    const auto gts = read_records(args.inputs[1]);
    for (const auto* list : {&preds, &gts}) {
        for (const auto& r : *list) {
            if (r.detection.class_id >= static_cast<int>(num_classes)) {
                throw std::invalid_argument(r.image_id + ": class id " + std::to_string(r.detection.class_id) +
                                            " >= num_classes");
            }
            if (use_mask && !r.detection.mask) {
                throw std::invalid_argument(r.image_id + ": eval-seg needs an rle mask on every record");
            }
        }
    }
    const auto images = group_by_image(preds, gts);
    const MetricsReport m = evaluate(images, num_classes, use_mask, conf);

    Report r;
    r.add("iou_type", use_mask ? "mask" : "box");
    r.add_count("images", images.size());
    r.add_count("num_classes", num_classes);
    r.add("map50", m.map.map50);
    r.add("map50_95", m.map.map50_95);
    for (std::size_t t = 0; t < kCocoThresholds.size(); ++t) {
        r.add("map@" + fixed6(kCocoThresholds[t]).substr(0, 4), m.map.map_at[t]);
    }
    for (std::size_t c = 0; c < num_classes; ++c) {
        if (!m.map.class_has_gt[c]) continue;
        double mean = 0.0;
        for (const double ap : m.map.ap[c]) mean += ap;
        r.add("ap50.class" + std::to_string(c), m.map.ap[c][0]);
        r.add("ap50_95.class" + std::to_string(c), mean / 10.0);
    }
    r.add_count("tp", m.counts.tp);
    r.add_count("fp", m.counts.fp);
    r.add_count("fn", m.counts.fn);
    r.add("precision", m.precision);
    r.add("recall", m.recall);
    r.add("mean_iou", m.mean_iou);
    r.add("mean_dice", m.mean_dice);
    for (std::size_t p = 0; p <= num_classes; ++p) {
        std::string row;
        for (std::size_t a = 0; a <= num_classes; ++a) row += (a ? " " : "") + fixed6(m.confusion.at(p, a));
        r.add("confusion.pred" + (p == num_classes ? std::string("_bg") : std::to_string(p)), row);
    }
    const std::size_t pairs = (args.inputs.size() - 2) / 2;
    if (pairs > 0) {
        std::vector<double> aurocs(pairs);
        parallel_for(pairs, args.threads, [&](std::size_t i) {
            const Tensor scores = read_pfm(args.inputs[2 + 2 * i]);
            const Mask mask = read_mask_pgm(args.inputs[3 + 2 * i]);
            aurocs[i] = pixel_auroc(scores, mask);
        });
        double sum = 0.0;
        for (const double a : aurocs) sum += a;
        r.add("pixel_auroc_mean", sum / static_cast<double>(pairs));
        r.add("pixel_auroc_min", *std::min_element(aurocs.begin(), aurocs.end()));
    }
    write_file_atomic(args.out_dir / "report.txt", r.str());

    if (cfg.get_bool("dump", false)) {
        std::string dump = "# image_id pred_index class_id score gt_index iou\n";
        for (const auto& img : images) {
            const MatchResult match = match_detections(img.predictions, img.ground_truth, 0.5, use_mask);
            for (std::size_t p = 0; p < img.predictions.size(); ++p) {
                dump += img.image_id + " " + std::to_string(p) + " " + std::to_string(img.predictions[p].class_id) +
                        " " + fixed6(img.predictions[p].score) + " " + std::to_string(match.pred_to_gt[p]) + " " +
                        fixed6(match.pred_iou[p]) + "\n";
            }
        }
        write_file_atomic(args.out_dir / "dump.txt", dump);
    }
}

// ---- gradcheck ---------------------------------------------------------------

void cmd_gradcheck(const CommandArgs& args) {
    const Config cfg = load_config(args, {"op", "channels", "height", "width", "seed", "samples", "eps", "tolerance"});
    require_inputs(args, 0, 0, "no input files");
    const std::string op_name = cfg.get_string("op", "muse");
    const std::size_t C = positive(cfg.get_uint("channels", 2), "channels");
    const std::size_t H = positive(cfg.get_uint("height", 6), "height");
    const std::size_t W = positive(cfg.get_uint("width", 6), "width");
    const std::uint64_t seed = cfg.get_uint("seed", 0);
    GradCheckOptions opts;
    opts.seed = seed;
    opts.samples = positive(cfg.get_uint("samples", opts.samples), "samples");
    opts.eps = cfg.get_double("eps", opts.eps);
    const double tolerance = cfg.get_double("tolerance", 1e-4);

    const ConvSpec noise = ConvSpec::seeded(1, C * H * W, 1, 1, seed + 17, 1.0f, false);
    TensorD x(C, H, W);
    for (std::size_t i = 0; i < x.size(); ++i) x[i] = noise.weights[i];
    const ConvSpec other_src = ConvSpec::seeded(1, C * H * W, 1, 1, seed + 29, 1.0f, false);
    TensorD other(C, H, W);
    for (std::size_t i = 0; i < other.size(); ++i) other[i] = other_src.weights[i];

    DifferentiableOp op;
    if (op_name == "conv") op = conv2d_op(ConvSpec::seeded(C, C, 3, 3, seed));
    else if (op_name == "pointwise_add") op = pointwise_op(other, PointwiseKind::add);
    else if (op_name == "pointwise_mul") op = pointwise_op(other, PointwiseKind::mul);
    else if (op_name == "sigmoid") op = sigmoid_op();
    else if (op_name == "gap") op = global_avg_pool_op();
    else if (op_name == "muse") op = muse_op(MuseBlock::seeded(C, 2 * C, seed));
    else throw std::invalid_argument("op must be conv, pointwise_add, pointwise_mul, sigmoid, gap or muse");

    const GradCheckResult res = grad_check(op, x, opts);
    Report r;
    r.add("op", op_name);
    r.add("shape", x.shape_string());
    r.add_count("probes", res.probes);
    r.add_count("worst_index", res.worst_index);
    r.add("max_relative_error", fixed6(res.max_relative_error) + " (" + format_real(res.max_relative_error) + ")");
    r.add("tolerance", format_real(tolerance));
    r.add("pass", res.max_relative_error <= tolerance ? "1" : "0");
    write_file_atomic(args.out_dir / "gradcheck.txt", r.str());
    if (res.max_relative_error > tolerance) {
        throw std::domain_error("gradcheck: " + op_name + " max relative error " +
                                format_real(res.max_relative_error) + " exceeds " + format_real(tolerance));
    }
}

// ---- count -------------------------------------------------------------------

void cmd_count(const CommandArgs& args) {
    const Config cfg = load_config(args, {"defect_width"});
    require_inputs(args, 0, 1, "an optional layer file");
    std::vector<LayerDescriptor> layers;
    if (args.inputs.empty()) {
        layers = reference_layer_table();
    } else {
        const std::vector<char> bytes = read_file(args.inputs.front());
        std::string_view text(bytes.data(), bytes.size());
        std::size_t line_no = 0;
        while (!text.empty()) {
            ++line_no;
            const std::size_t nl = text.find('\n');
            const std::string_view line = text.substr(0, nl);
            text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
            const auto first = line.find_first_not_of(" \t\r");
            if (first == std::string_view::npos || line[first] == '#') continue;
            try {
                layers.push_back(parse_layer(line));
            } catch (const std::invalid_argument& e) {
                throw std::invalid_argument(args.inputs.front().string() + ":" + std::to_string(line_no) + ": " +
                                            e.what());
            }
        }
    }
    const ComplexityTotals totals = count_params_flops(layers);
    std::string table = "# index kind label params flops output_size\n";
    for (std::size_t i = 0; i < layers.size(); ++i) {
        table += std::to_string(i) + " " + layers[i].kind + " " + (layers[i].label.empty() ? "-" : layers[i].label) +
                 " " + std::to_string(totals.layers[i].params) + " " + std::to_string(totals.layers[i].flops) + " " +
                 std::to_string(totals.layers[i].output_size) + "\n";
    }
    Report r;
    r.add_count("layers", layers.size());
    r.add_count("params", totals.params);
    r.add_count("flops", totals.flops);
    r.add("gflops", static_cast<double>(totals.flops) / 1e9);
    if (cfg.has("defect_width")) {
        const double w = cfg.get_double("defect_width", 0.0);
        for (const std::size_t s : {2u, 4u, 8u, 16u, 32u}) {
            const NyquistReport n = nyquist_min_scale(w, s);
            r.add("nyquist.stride" + std::to_string(s) + ".ratio", n.ratio);
            r.add("nyquist.stride" + std::to_string(s) + ".feasible", n.feasible ? "1" : "0");
        }
        r.add_count("nyquist.largest_feasible_stride", nyquist_min_scale(w, 2).largest_feasible_stride);
    }
    write_file_atomic(args.out_dir / "count.txt", r.str());
    write_file_atomic(args.out_dir / "layers.txt", table);
}

}  // namespace

void run_command(const CommandArgs& args) {
    if (args.threads == 0) throw std::invalid_argument("--threads must be at least 1");
    if (args.out_dir.empty()) throw std::invalid_argument("an output directory is required");
    std::error_code ec;
    fs::create_directories(args.out_dir, ec);
    if (ec || !fs::is_directory(args.out_dir)) throw IoError(args.out_dir.string() + ": cannot create output directory");

    static const std::map<std::string, std::function<void(const CommandArgs&)>, std::less<>> table = {
        {"gen", cmd_gen},
        {"enhance", cmd_enhance},
        {"muse", cmd_muse},
        {"fuse", cmd_fuse},
        {"eval-seg", [](const CommandArgs& a) { cmd_eval(a, true); }},
        {"eval-det", [](const CommandArgs& a) { cmd_eval(a, false); }},
        {"gradcheck", cmd_gradcheck},
        {"count", cmd_count},
    };
    const auto it = table.find(args.name);
    if (it == table.end()) throw std::invalid_argument("unknown subcommand '" + args.name + "'");
    it->second(args);
}

int exit_code_for_current_exception() noexcept {
    try {
        throw;
    } catch (const IoError& e) {
        std::cerr << "wafertex: I/O error: " << e.what() << "\n";
        return 2;
    } catch (const fs::filesystem_error& e) {
        std::cerr << "wafertex: I/O error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "wafertex: " << e.what() << "\n";
        return 1;
    } catch (...) {
        std::cerr << "wafertex: unknown error\n";
        return 1;
    }
}

}  // namespace wafertex
