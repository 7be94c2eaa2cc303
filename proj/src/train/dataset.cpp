#include "train/dataset.hpp"

#include "common/error.hpp"
#include "common/rng.hpp"
#include "imaging/io.hpp"

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

namespace fs = std::filesystem;

namespace cfe::train {

namespace {

bool supported_extension(const fs::path& p) {
    std::string ext = p.extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return ext == ".png" || ext == ".ppm";
}

std::map<std::string, std::string> scan_dir(const std::string& dir) {
    if (!fs::is_directory(dir))
        throw Error::data("dataset directory does not exist: " + dir);
    std::map<std::string, std::string> by_stem;
    for (const auto& entry : fs::directory_iterator(dir)) {
        if (!entry.is_regular_file() || !supported_extension(entry.path()))
            continue;
        const std::string stem = entry.path().stem().string();
        if (by_stem.count(stem))
            throw Error::data("duplicate stem '" + stem + "' in " + dir);
        by_stem[stem] = entry.path().string();
    }
    return by_stem;
}

std::set<std::string> read_stems_file(const std::string& path) {
    std::ifstream f(path);
    if (!f)
        throw Error::io("cannot open val stems file: " + path);
    std::set<std::string> stems;
    std::string line;
    while (std::getline(f, line)) {
        while (!line.empty() && (line.back() == '\r' || line.back() == ' '))
            line.pop_back();
        if (!line.empty())
            stems.insert(line);
    }
    return stems;
}

} // namespace

std::vector<const ManifestEntry*> DatasetManifest::split(const std::string& tag) const {
    std::vector<const ManifestEntry*> out;
    for (const ManifestEntry& e : entries)
        if (e.split == tag)
            out.push_back(&e);
    return out;
}

DatasetManifest ingest_dataset(const std::string& raw_dir, const std::string& target_dir,
                               int longer_edge, int pad_size, int val_count,
                               const std::string& val_stems_file, std::uint64_t seed) {
    if (pad_size < longer_edge)
        throw Error::config("pad_size " + std::to_string(pad_size) +
                            " is smaller than longer_edge " + std::to_string(longer_edge));
    auto raws = scan_dir(raw_dir);
    auto targets = scan_dir(target_dir);

    for (const auto& [stem, path] : raws)
        if (!targets.count(stem))
            throw Error::data("raw image '" + stem + "' has no target pair");
    for (const auto& [stem, path] : targets)
        if (!raws.count(stem))
            throw Error::data("target image '" + stem + "' has no raw pair");

    DatasetManifest m;
    m.longer_edge = longer_edge;
    m.pad_size = pad_size;
    for (const auto& [stem, raw_path] : raws) {
        const img::Image raw = img::resize_longer_edge(img::load_image(raw_path), longer_edge);
        const img::Image tgt =
            img::resize_longer_edge(img::load_image(targets.at(stem)), longer_edge);
        if (raw.width != tgt.width || raw.height != tgt.height)
            throw Error::data("pair '" + stem + "' dimensions differ after resize: " +
                              std::to_string(raw.width) + "x" + std::to_string(raw.height) +
                              " vs " + std::to_string(tgt.width) + "x" +
                              std::to_string(tgt.height));
        m.entries.push_back(
            ManifestEntry{stem, raw_path, targets.at(stem), raw.width, raw.height, "train"});
    }

    if (!val_stems_file.empty()) {
        const auto stems = read_stems_file(val_stems_file);
        for (ManifestEntry& e : m.entries)
            if (stems.count(e.stem))
                e.split = "val";
    } else if (val_count > 0) {
        if (static_cast<std::size_t>(val_count) > m.entries.size())
            throw Error::config("dataset.val_count exceeds dataset size");
        Rng rng = Rng::derive(seed, 0x76616cULL); // "val"
        const auto perm = rng.permutation(m.entries.size());
        for (int i = 0; i < val_count; ++i)
            m.entries[perm[static_cast<std::size_t>(i)]].split = "val";
    }
    return m;
}

DatasetManifest ingest_from_config(const RunConfig& cfg) {
    if (cfg.dataset.raw_dir.empty() || cfg.dataset.target_dir.empty())
        throw Error::config("dataset.raw_dir and dataset.target_dir must be set");
    return ingest_dataset(cfg.dataset.raw_dir, cfg.dataset.target_dir, cfg.dataset.longer_edge,
                          cfg.dataset.pad_size, cfg.dataset.val_count,
                          cfg.dataset.val_stems_file, cfg.seed);
}

void save_manifest(const DatasetManifest& m, const std::string& path) {
    std::ofstream f(path, std::ios::trunc);
    if (!f)
        throw Error::io("cannot write manifest: " + path);
    f << "# pairs-manifest v1\n";
    f << "# longer_edge=" << m.longer_edge << " pad_size=" << m.pad_size << "\n";
    for (const ManifestEntry& e : m.entries)
        f << e.split << '\t' << e.stem << '\t' << e.raw_path << '\t' << e.target_path << '\t'
          << e.width << '\t' << e.height << '\n';
    if (!f)
        throw Error::io("cannot write manifest: " + path);
}

DatasetManifest load_manifest(const std::string& path) {
    std::ifstream f(path);
    if (!f)
        throw Error::io("cannot open manifest: " + path);
    DatasetManifest m;
    std::string line;
    if (!std::getline(f, line) || line.rfind("# pairs-manifest v1", 0) != 0)
        throw Error::data("not a manifest file: " + path);
    if (!std::getline(f, line) ||
        std::sscanf(line.c_str(), "# longer_edge=%d pad_size=%d", &m.longer_edge,
                    &m.pad_size) != 2)
        throw Error::data("manifest missing preprocessing header: " + path);
    while (std::getline(f, line)) {
        if (line.empty())
            continue;
        std::stringstream ss(line);
        ManifestEntry e;
        std::string w, h;
        if (!std::getline(ss, e.split, '\t') || !std::getline(ss, e.stem, '\t') ||
            !std::getline(ss, e.raw_path, '\t') || !std::getline(ss, e.target_path, '\t') ||
            !std::getline(ss, w, '\t') || !std::getline(ss, h))
            throw Error::data("malformed manifest record: " + line);
        e.width = std::stoi(w);
        e.height = std::stoi(h);
        m.entries.push_back(std::move(e));
    }
    return m;
}

LoadedPair load_pair(const ManifestEntry& e, int longer_edge, int pad_size) {
    const img::Image raw = img::resize_longer_edge(img::load_image(e.raw_path), longer_edge);
    const img::Image tgt = img::resize_longer_edge(img::load_image(e.target_path), longer_edge);
    if (raw.width != tgt.width || raw.height != tgt.height)
        throw Error::data("pair '" + e.stem + "' dimensions differ after resize");
    const img::PaddedImage praw = img::pad_to_square(raw, pad_size);
    const img::PaddedImage ptgt = img::pad_to_square(tgt, pad_size);
    LoadedPair p;
    p.stem = e.stem;
    p.raw = img::image_to_tensor(praw.image);
    p.target = img::image_to_tensor(ptgt.image);
    p.mask3 = img::mask_to_tensor3(praw);
    p.mask = praw.mask;
    p.width = raw.width;
    p.height = raw.height;
    return p;
}

} // namespace cfe::train
