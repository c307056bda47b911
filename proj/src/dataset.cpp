#include "biaslens/dataset.hpp"

#include <algorithm>
#include <fstream>
#include <map>

#include <nlohmann/json.hpp>

#include "biaslens/error.hpp"
#include "biaslens/image_io.hpp"
#include "biaslens/parallel.hpp"
#include "biaslens/rng.hpp"

namespace biaslens::dataset {

namespace fs = std::filesystem;
using nlohmann::json;

const char* split_name(Split s) {
    switch (s) {
        case Split::Train: return "train";
        case Split::Val: return "val";
        case Split::Test: return "test";
    }
    return "?";
}

Split split_from_name(const std::string& name) {
    if (name == "train") return Split::Train;
    if (name == "val") return Split::Val;
    if (name == "test") return Split::Test;
    throw ParameterError("unknown split name '" + name + "'");
}

std::vector<size_t> LabeledDataset::split_indices(Split s) const {
    std::vector<size_t> out;
    for (size_t i = 0; i < items.size(); ++i)
        if (items[i].split == s) out.push_back(i);
    return out;
}

std::optional<json> LabeledDataset::manifest_extra() const {
    if (extra_) return *extra_;
    return std::nullopt;
}

void LabeledDataset::set_manifest_extra(json extra) {
    extra_ = std::make_shared<json>(std::move(extra));
}

namespace {

bool is_image_file(const fs::path& p) {
    const auto ext = p.extension().string();
    return ext == ".png" || ext == ".pgm" || ext == ".ppm";
}

LabeledDataset from_manifest(const fs::path& root, const json& m) {
    LabeledDataset ds;
    ds.root = root;
    if (!m.contains("classes") || !m["classes"].is_array())
        throw FormatError("manifest.json missing 'classes' array: " + root.string());
    for (const auto& c : m["classes"]) ds.class_names.push_back(c.get<std::string>());
    for (const auto& it : m.at("items")) {
        Item item;
        item.rel_path = it.at("path").get<std::string>();
        item.class_id = it.at("class").get<int>();
        item.split = split_from_name(it.at("split").get<std::string>());
        if (item.class_id < 0 || item.class_id >= ds.num_classes())
            throw FormatError("manifest class id out of range for " + item.rel_path);
        ds.items.push_back(std::move(item));
    }
    json extra;
    for (const auto& key : {"seed", "synth_spec", "bias_spec"})
        if (m.contains(key)) extra[key] = m[key];
    if (!extra.is_null()) ds.set_manifest_extra(std::move(extra));
    return ds;
}

}  // namespace

LabeledDataset scan_dataset(const fs::path& root) {
    if (!fs::is_directory(root))
        throw IoError("dataset root is not a directory: " + root.string());

    const fs::path manifest_path = root / "manifest.json";
    if (fs::exists(manifest_path)) {
        std::ifstream in(manifest_path);
        if (!in) throw IoError("cannot read " + manifest_path.string());
        json m;
        try {
            m = json::parse(in);
        } catch (const json::parse_error& e) {
            throw FormatError("malformed manifest.json: " + std::string(e.what()));
        }
        return from_manifest(root, m);
    }

    LabeledDataset ds;
    ds.root = root;
    std::vector<std::string> class_dirs;
    for (const auto& entry : fs::directory_iterator(root))
        if (entry.is_directory()) class_dirs.push_back(entry.path().filename().string());
    std::sort(class_dirs.begin(), class_dirs.end());
    if (class_dirs.empty())
        throw DatasetError("no class directories under " + root.string());

    ds.class_names = class_dirs;
    for (int cid = 0; cid < static_cast<int>(class_dirs.size()); ++cid) {
        std::vector<std::string> files;
        for (const auto& entry : fs::directory_iterator(root / class_dirs[cid]))
            if (entry.is_regular_file() && is_image_file(entry.path()))
                files.push_back(entry.path().filename().string());
        std::sort(files.begin(), files.end());
        for (const auto& f : files) {
            Item item;
            item.rel_path = class_dirs[cid] + "/" + f;
            item.class_id = cid;
            // No manifest: deterministic 70/15/15 assignment from the path hash.
            const double u =
                static_cast<double>(fnv1a_hash(item.rel_path) >> 11) * 0x1.0p-53;
            item.split = u < 0.70 ? Split::Train : (u < 0.85 ? Split::Val : Split::Test);
            ds.items.push_back(std::move(item));
        }
    }
    if (ds.items.empty()) throw DatasetError("no images under " + root.string());
    return ds;
}

void write_manifest(const LabeledDataset& ds) {
    json m;
    m["classes"] = ds.class_names;
    json items = json::array();
    for (const auto& it : ds.items) {
        items.push_back({{"path", it.rel_path},
                         {"class", it.class_id},
                         {"split", split_name(it.split)}});
    }
    m["items"] = items;
    if (auto extra = ds.manifest_extra()) {
        for (auto& [k, v] : extra->items()) m[k] = v;
    }
    const fs::path out = ds.root / "manifest.json";
    const fs::path tmp = ds.root / "manifest.json.tmp";
    {
        std::ofstream f(tmp);
        if (!f) throw IoError("cannot write " + tmp.string());
        f << m.dump(2) << "\n";
    }
    fs::rename(tmp, out);
}

image::ImageTensor load_item(const LabeledDataset& ds, const Item& item) {
    return image::load_image(ds.root / item.rel_path);
}

uint64_t path_salt(const Item& item) {
    return fnv1a_hash(item.rel_path);
}

LabeledDataset apply_to_dataset(const LabeledDataset& ds,
                                const transforms::TransformSpec& spec,
                                const fs::path& out_root, int jobs) {
    transforms::validate(spec);
    fs::create_directories(out_root);
    for (const auto& name : ds.class_names) fs::create_directories(out_root / name);

    LabeledDataset out;
    out.root = out_root;
    out.class_names = ds.class_names;
    out.items.resize(ds.items.size());

    parallel_for(ds.items.size(), jobs, [&](size_t i) {
        const Item& item = ds.items[i];
        try {
            const auto img = load_item(ds, item);
            const auto result = transforms::apply(spec, img, path_salt(item));
            Item out_item = item;
            // Transformed pixels are always written as PNG.
            const fs::path rel(item.rel_path);
            if (rel.extension() != ".png")
                out_item.rel_path =
                    (rel.parent_path() / rel.stem()).generic_string() + ".png";
            image::save_image(result, out_root / out_item.rel_path);
            out.items[i] = std::move(out_item);
        } catch (const Error& e) {
            throw Error("while transforming '" + item.rel_path + "': " + e.what());
        }
    });

    if (auto extra = ds.manifest_extra()) out.set_manifest_extra(*extra);
    write_manifest(out);
    return out;
}

}  // namespace biaslens::dataset
