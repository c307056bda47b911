#pragma once

#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "biaslens/image.hpp"
#include "biaslens/transforms.hpp"

namespace biaslens::dataset {

enum class Split { Train, Val, Test };

const char* split_name(Split s);
Split split_from_name(const std::string& name);

struct Item {
    std::string rel_path;  // "<class_name>/<file>", '/' separators
    int class_id = 0;
    Split split = Split::Train;
};

// Ordered collection of (image, class) pairs rooted at a directory laid
// out as root/<class_name>/<image>.png. Items are sorted by rel_path so
// iteration order never depends on filesystem enumeration order.
struct LabeledDataset {
    std::filesystem::path root;
    std::vector<std::string> class_names;
    std::vector<Item> items;

    int num_classes() const { return static_cast<int>(class_names.size()); }
    std::vector<size_t> split_indices(Split s) const;

    // Optional extra manifest payload (synth generator provenance).
    std::optional<nlohmann::json> manifest_extra() const;
    void set_manifest_extra(nlohmann::json extra);

private:
    std::shared_ptr<nlohmann::json> extra_;
};

// Scans root/<class>/<image>. When root/manifest.json exists it is the
// ground truth for classes, item order and split assignment; otherwise
// splits are derived deterministically from a stable per-path hash at
// 70/15/15.
LabeledDataset scan_dataset(const std::filesystem::path& root);

void write_manifest(const LabeledDataset& ds);

image::ImageTensor load_item(const LabeledDataset& ds, const Item& item);

// Stable per-item salt mixed into tile_scramble seeds.
uint64_t path_salt(const Item& item);

// Applies `spec` to every image, writing a mirrored tree (always PNG) plus
// manifest under out_root. Labels and split assignment are preserved. Any
// per-image failure aborts with the offending path in the message.
LabeledDataset apply_to_dataset(const LabeledDataset& ds,
                                const transforms::TransformSpec& spec,
                                const std::filesystem::path& out_root, int jobs = 0);

}  // namespace biaslens::dataset
