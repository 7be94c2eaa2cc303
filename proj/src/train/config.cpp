#include "train/config.hpp"

#include "common/error.hpp"

#include <json.hpp>

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

namespace cfe::train {

using nlohmann::json;

namespace {

void check_keys(const json& obj, const std::string& path, const std::set<std::string>& allowed) {
    for (const auto& item : obj.items())
        if (!allowed.count(item.key()))
            throw Error::config("unknown config key: " + path + item.key());
}

template <typename T>
T get_or(const json& obj, const std::string& path, const char* key, T fallback) {
    if (!obj.contains(key))
        return fallback;
    try {
        return obj.at(key).get<T>();
    } catch (const json::exception&) {
        throw Error::config("config key has wrong type: " + path + key);
    }
}

models::NonLocalPosition parse_position(const std::string& s) {
    if (s == "front")
        return models::NonLocalPosition::front;
    if (s == "middle")
        return models::NonLocalPosition::middle;
    if (s == "end")
        return models::NonLocalPosition::end;
    throw Error::config("prnet.nonlocal_position must be front, middle or end, got '" + s + "'");
}

std::string position_name(models::NonLocalPosition p) {
    switch (p) {
    case models::NonLocalPosition::front:
        return "front";
    case models::NonLocalPosition::middle:
        return "middle";
    default:
        return "end";
    }
}

void validate(const RunConfig& c) {
    if (c.train.lr_initial <= 0.0)
        throw Error::config("train.lr_initial must be > 0");
    if (c.train.lr_decay_factor <= 0.0 || c.train.lr_decay_factor > 1.0)
        throw Error::config("train.lr_decay_factor must be in (0, 1]");
    if (c.train.lr_decay_every_steps < 1)
        throw Error::config("train.lr_decay_every_steps must be >= 1");
    if (c.train.momentum < 0.0 || c.train.momentum >= 1.0)
        throw Error::config("train.momentum must be in [0, 1)");
    if (c.train.batch_size < 1)
        throw Error::config("train.batch_size must be >= 1");
    if (c.train.epochs < 0)
        throw Error::config("train.epochs must be >= 0");
    if (c.dataset.longer_edge < 1)
        throw Error::config("dataset.longer_edge must be >= 1");
    if (c.dataset.pad_size < 1)
        throw Error::config("dataset.pad_size must be >= 1");
    if (c.dataset.val_count < 0)
        throw Error::config("dataset.val_count must be >= 0");
    if (c.prnet.base_channels < 1)
        throw Error::config("prnet.base_channels must be >= 1");
    if (c.prnet.num_residual_blocks < 1)
        throw Error::config("prnet.num_residual_blocks must be >= 1");
    if (4 * c.prnet.base_channels % 2 != 0)
        throw Error::config("prnet.base_channels must give an even transform width");
    for (int ch : c.cenet.backbone_channels)
        if (ch < 1)
            throw Error::config("cenet.backbone_channels entries must be >= 1");
    for (int wdt : c.cenet.head_widths)
        if (wdt < 1)
            throw Error::config("cenet.head_widths entries must be >= 1");
    (void)variant_spec(c.variant, c.prnet);
    for (const std::string& v : c.ablation_variants)
        (void)variant_spec(v, c.prnet);
}

RunConfig from_json(const json& root) {
    if (!root.is_object())
        throw Error::config("config root must be a JSON object");
    check_keys(root, "",
               {"seed", "output_root", "checkpoint_dir", "variant", "dataset", "train", "cenet",
                "prnet", "ablation"});
    RunConfig c;
    c.seed = get_or<std::uint64_t>(root, "", "seed", c.seed);
    c.output_root = get_or<std::string>(root, "", "output_root", c.output_root);
    c.checkpoint_dir = get_or<std::string>(root, "", "checkpoint_dir", c.checkpoint_dir);
    c.variant = get_or<std::string>(root, "", "variant", c.variant);

    if (root.contains("dataset")) {
        const json& d = root.at("dataset");
        check_keys(d, "dataset.",
                   {"raw_dir", "target_dir", "longer_edge", "pad_size", "val_count",
                    "val_stems_file"});
        c.dataset.raw_dir = get_or<std::string>(d, "dataset.", "raw_dir", "");
        c.dataset.target_dir = get_or<std::string>(d, "dataset.", "target_dir", "");
        c.dataset.longer_edge = get_or<int>(d, "dataset.", "longer_edge", c.dataset.longer_edge);
        c.dataset.pad_size = get_or<int>(d, "dataset.", "pad_size", c.dataset.pad_size);
        c.dataset.val_count = get_or<int>(d, "dataset.", "val_count", c.dataset.val_count);
        c.dataset.val_stems_file =
            get_or<std::string>(d, "dataset.", "val_stems_file", c.dataset.val_stems_file);
    }
    if (root.contains("train")) {
        const json& t = root.at("train");
        check_keys(t, "train.",
                   {"lr_initial", "lr_decay_factor", "lr_decay_every_steps", "momentum",
                    "batch_size", "epochs", "max_steps", "checkpoint_every_steps"});
        c.train.lr_initial = get_or<double>(t, "train.", "lr_initial", c.train.lr_initial);
        c.train.lr_decay_factor =
            get_or<double>(t, "train.", "lr_decay_factor", c.train.lr_decay_factor);
        c.train.lr_decay_every_steps =
            get_or<long>(t, "train.", "lr_decay_every_steps", c.train.lr_decay_every_steps);
        c.train.momentum = get_or<double>(t, "train.", "momentum", c.train.momentum);
        c.train.batch_size = get_or<int>(t, "train.", "batch_size", c.train.batch_size);
        c.train.epochs = get_or<long>(t, "train.", "epochs", c.train.epochs);
        c.train.max_steps = get_or<long>(t, "train.", "max_steps", c.train.max_steps);
        c.train.checkpoint_every_steps =
            get_or<long>(t, "train.", "checkpoint_every_steps", c.train.checkpoint_every_steps);
    }
    if (root.contains("cenet")) {
        const json& m = root.at("cenet");
        check_keys(m, "cenet.", {"backbone_channels", "head_widths"});
        c.cenet.backbone_channels = get_or<std::vector<int>>(m, "cenet.", "backbone_channels",
                                                             c.cenet.backbone_channels);
        c.cenet.head_widths =
            get_or<std::vector<int>>(m, "cenet.", "head_widths", c.cenet.head_widths);
    }
    if (root.contains("prnet")) {
        const json& m = root.at("prnet");
        check_keys(m, "prnet.",
                   {"base_channels", "num_residual_blocks", "use_nonlocal",
                    "nonlocal_position"});
        c.prnet.base_channels = get_or<int>(m, "prnet.", "base_channels", c.prnet.base_channels);
        c.prnet.num_residual_blocks =
            get_or<int>(m, "prnet.", "num_residual_blocks", c.prnet.num_residual_blocks);
        c.prnet.use_nonlocal = get_or<bool>(m, "prnet.", "use_nonlocal", c.prnet.use_nonlocal);
        c.prnet.nonlocal_position = parse_position(
            get_or<std::string>(m, "prnet.", "nonlocal_position", "front"));
    }
    if (root.contains("ablation")) {
        const json& a = root.at("ablation");
        check_keys(a, "ablation.", {"variants"});
        c.ablation_variants =
            get_or<std::vector<std::string>>(a, "ablation.", "variants", c.ablation_variants);
    }
    validate(c);
    return c;
}

json to_json(const RunConfig& c) {
    json root;
    root["seed"] = c.seed;
    root["output_root"] = c.output_root;
    root["checkpoint_dir"] = c.checkpoint_dir;
    root["variant"] = c.variant;
    root["dataset"] = {{"raw_dir", c.dataset.raw_dir},
                       {"target_dir", c.dataset.target_dir},
                       {"longer_edge", c.dataset.longer_edge},
                       {"pad_size", c.dataset.pad_size},
                       {"val_count", c.dataset.val_count},
                       {"val_stems_file", c.dataset.val_stems_file}};
    root["train"] = {{"lr_initial", c.train.lr_initial},
                     {"lr_decay_factor", c.train.lr_decay_factor},
                     {"lr_decay_every_steps", c.train.lr_decay_every_steps},
                     {"momentum", c.train.momentum},
                     {"batch_size", c.train.batch_size},
                     {"epochs", c.train.epochs},
                     {"max_steps", c.train.max_steps},
                     {"checkpoint_every_steps", c.train.checkpoint_every_steps}};
    root["cenet"] = {{"backbone_channels", c.cenet.backbone_channels},
                     {"head_widths", c.cenet.head_widths}};
    root["prnet"] = {{"base_channels", c.prnet.base_channels},
                     {"num_residual_blocks", c.prnet.num_residual_blocks},
                     {"use_nonlocal", c.prnet.use_nonlocal},
                     {"nonlocal_position", position_name(c.prnet.nonlocal_position)}};
    root["ablation"] = {{"variants", c.ablation_variants}};
    return root;
}

} // namespace

RunConfig parse_config_text(const std::string& json_text) {
    json root;
    try {
        root = json::parse(json_text);
    } catch (const json::exception& e) {
        throw Error::config(std::string("config is not valid JSON: ") + e.what());
    }
    return from_json(root);
}

RunConfig load_config(const std::string& path) {
    std::ifstream f(path);
    if (!f)
        throw Error::io("cannot open config file: " + path);
    std::stringstream ss;
    ss << f.rdbuf();
    return parse_config_text(ss.str());
}

void apply_override(RunConfig& cfg, const std::string& dotted_key, const std::string& value) {
    json root = to_json(cfg);
    // navigate to the parent object of the dotted path
    json* node = &root;
    std::string rest = dotted_key;
    std::string consumed;
    while (true) {
        const std::size_t dot = rest.find('.');
        if (dot == std::string::npos)
            break;
        const std::string head = rest.substr(0, dot);
        if (!node->contains(head) || !(*node)[head].is_object())
            throw Error::config("unknown config key: " + consumed + head);
        node = &(*node)[head];
        consumed += head + ".";
        rest = rest.substr(dot + 1);
    }
    if (!node->contains(rest))
        throw Error::config("unknown config key: " + consumed + rest);

    // values that parse as JSON are taken structurally, anything else as string
    json parsed = json::parse(value, nullptr, false);
    if (parsed.is_discarded())
        (*node)[rest] = value;
    else
        (*node)[rest] = parsed;
    cfg = from_json(root);
}

std::string serialize_config(const RunConfig& cfg, bool pretty) {
    return pretty ? to_json(cfg).dump(2) : to_json(cfg).dump();
}

std::uint64_t config_hash(const RunConfig& cfg) {
    const std::string s = serialize_config(cfg);
    std::uint64_t h = 0xcbf29ce484222325ULL; // FNV-1a
    for (unsigned char ch : s) {
        h ^= ch;
        h *= 0x100000001b3ULL;
    }
    return h;
}

double lr_at_step(const TrainConfig& c, long step) {
    const long k = step / c.lr_decay_every_steps;
    return c.lr_initial * std::pow(c.lr_decay_factor, static_cast<double>(k));
}

VariantSpec variant_spec(const std::string& name, const models::PRNetConfig& base) {
    VariantSpec v;
    v.name = name;
    if (name == "CE") {
        v.use_cenet = true;
    } else if (name == "PR") {
        v.use_prnet = true;
        v.prnet_residual_blocks = 18;
        v.prnet_use_nonlocal = false;
    } else if (name == "PRNL") {
        v.use_prnet = true;
        v.prnet_residual_blocks = base.num_residual_blocks;
        v.prnet_use_nonlocal = true;
    } else if (name == "CE+PR" || name == "CE_PR") {
        v.name = "CE+PR";
        v.use_cenet = true;
        v.use_prnet = true;
        v.prnet_residual_blocks = base.num_residual_blocks;
        v.prnet_use_nonlocal = false;
    } else if (name == "CE+PRNL" || name == "CE_PRNL") {
        v.name = "CE+PRNL";
        v.use_cenet = true;
        v.use_prnet = true;
        v.prnet_residual_blocks = base.num_residual_blocks;
        v.prnet_use_nonlocal = true;
    } else {
        throw Error::config("unknown variant '" + name +
                            "' (expected CE, PR, PRNL, CE+PR or CE+PRNL)");
    }
    return v;
}

models::PRNetConfig prnet_config_for_variant(const VariantSpec& v,
                                             const models::PRNetConfig& base) {
    models::PRNetConfig cfg = base;
    cfg.num_residual_blocks = v.prnet_residual_blocks;
    cfg.use_nonlocal = v.prnet_use_nonlocal;
    return cfg;
}

} // namespace cfe::train
