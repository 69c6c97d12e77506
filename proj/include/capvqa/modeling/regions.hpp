// Copyright (C) 2026 The capvqa Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "capvqa/error.hpp"
#include "capvqa/json_io.hpp"
#include "capvqa/types.hpp"

namespace capvqa {

/// Feature width of the detector used for the reference region dumps.
inline constexpr std::size_t kReferenceRegionDim = 2048;
inline constexpr std::size_t kBoxDim = 4;

/// Per-image object features: one row per detected region.
struct RegionFeatureSet {
    ImageId image_id = 0;
    Eigen::MatrixXd features;              // n_v x d_v
    std::optional<Eigen::MatrixXd> boxes;  // n_v x 4

    std::size_t n_v() const { return static_cast<std::size_t>(features.rows()); }
    std::size_t d_v() const { return static_cast<std::size_t>(features.cols()); }

    void validate() const {
        if (!features.allFinite())
            throw ValidationError("region features for image " + std::to_string(image_id) + " are not finite");
        if (boxes && (boxes->rows() != features.rows() || boxes->cols() != static_cast<Eigen::Index>(kBoxDim)))
            throw ValidationError("bounding boxes for image " + std::to_string(image_id) + " have the wrong shape");
    }
};

// Region file layout (text, one file per image):
//
//   capvqa-regions 1
//   image_id <int> n_v <int> d_v <int> boxes <0|1>
//   <d_v values> [<x1 y1 x2 y2>]        (n_v lines)

inline std::string format_regions(const RegionFeatureSet& r) {
    std::ostringstream out;
    out.precision(17);
    out << "capvqa-regions 1\n"
        << "image_id " << r.image_id << " n_v " << r.n_v() << " d_v " << r.d_v() << " boxes " << (r.boxes ? 1 : 0)
        << "\n";
    for (Eigen::Index i = 0; i < r.features.rows(); ++i) {
        for (Eigen::Index j = 0; j < r.features.cols(); ++j) out << (j ? " " : "") << r.features(i, j);
        if (r.boxes)
            for (Eigen::Index j = 0; j < 4; ++j) out << " " << (*r.boxes)(i, j);
        out << "\n";
    }
    return out.str();
}

inline RegionFeatureSet parse_regions(std::string_view text, std::string_view source = "regions") {
    std::istringstream in{std::string(text)};
    std::string line;
    std::size_t line_no = 0;
    auto next_line = [&]() -> std::istringstream {
        if (!std::getline(in, line)) throw ParseError(std::string(source) + ": unexpected end of file", line_no + 1);
        ++line_no;
        return std::istringstream(line);
    };
    {
        auto l = next_line();
        std::string magic;
        int version = 0;
        if (!(l >> magic >> version) || magic != "capvqa-regions" || version != 1)
            throw ParseError(std::string(source) + ": missing 'capvqa-regions 1' header", line_no);
    }
    RegionFeatureSet r;
    std::size_t n_v = 0, d_v = 0;
    int has_boxes = 0;
    {
        auto l = next_line();
        std::string k1, k2, k3, k4;
        if (!(l >> k1 >> r.image_id >> k2 >> n_v >> k3 >> d_v >> k4 >> has_boxes) || k1 != "image_id" || k2 != "n_v" ||
            k3 != "d_v" || k4 != "boxes")
            throw ParseError(std::string(source) + ": malformed shape line", line_no);
    }
    r.features.resize(static_cast<Eigen::Index>(n_v), static_cast<Eigen::Index>(d_v));
    if (has_boxes) r.boxes = Eigen::MatrixXd(static_cast<Eigen::Index>(n_v), 4);
    for (std::size_t i = 0; i < n_v; ++i) {
        auto l = next_line();
        const auto row = static_cast<Eigen::Index>(i);
        for (std::size_t j = 0; j < d_v; ++j)
            if (!(l >> r.features(row, static_cast<Eigen::Index>(j))))
                throw ParseError(std::string(source) + ": expected " + std::to_string(d_v) + " feature values", line_no);
        if (has_boxes)
            for (Eigen::Index j = 0; j < 4; ++j)
                if (!(l >> (*r.boxes)(row, j))) throw ParseError(std::string(source) + ": expected 4 box values", line_no);
        std::string extra;
        if (l >> extra) throw ParseError(std::string(source) + ": trailing values on region row", line_no);
    }
    r.validate();
    return r;
}

inline std::filesystem::path region_file(const std::filesystem::path& dir, ImageId image) {
    return dir / (std::to_string(image) + ".regions");
}

inline RegionFeatureSet load_regions(const std::filesystem::path& path) {
    return parse_regions(detail::read_file(path), path.string());
}

/// Region features for a set of images, loaded from a directory of
/// `<image_id>.regions` files.
class RegionStore {
public:
    RegionStore() = default;

    void insert(RegionFeatureSet r) {
        const auto id = r.image_id;
        regions_.insert_or_assign(id, std::move(r));
    }

    const RegionFeatureSet& at(ImageId image) const {
        auto it = regions_.find(image);
        if (it == regions_.end()) throw ValidationError("no region features for image " + std::to_string(image));
        return it->second;
    }

    bool contains(ImageId image) const { return regions_.count(image) != 0; }
    std::size_t size() const { return regions_.size(); }

    template <class ImageIds>
    static RegionStore load_directory(const std::filesystem::path& dir, const ImageIds& images) {
        RegionStore store;
        for (ImageId id : images) {
            if (store.contains(id)) continue;
            auto r = load_regions(region_file(dir, id));
            if (r.image_id != id)
                throw ValidationError("region file for image " + std::to_string(id) + " declares image " +
                                      std::to_string(r.image_id));
            store.insert(std::move(r));
        }
        return store;
    }

private:
    std::map<ImageId, RegionFeatureSet> regions_;
};

// ---------------------------------------------------------------------------
// Multimodal input assembly
// ---------------------------------------------------------------------------

struct MultimodalOptions {
    /// Region width the visual projection was built for.
    std::size_t expected_d_v = kReferenceRegionDim;
    /// Append the 4 box coordinates to each region feature.
    bool concat_boxes = false;
};

enum class SlotKind { question, caption, region };

struct InputSlot {
    SlotKind kind = SlotKind::question;
    std::string text;          // question / caption slots
    std::size_t region = 0;    // region slots: row in `region_inputs`
};

/// Ordered text segments followed by one slot per region.
struct MultimodalInput {
    std::vector<InputSlot> slots;
    /// n_v x (d_v [+ 4]) rows fed to the visual projection.
    Eigen::MatrixXd region_inputs;

    std::size_t n_regions() const { return static_cast<std::size_t>(region_inputs.rows()); }

    /// e.g. "question|caption|region x36".
    std::string layout() const {
        std::string out;
        std::size_t regions = 0;
        for (const auto& s : slots) {
            if (s.kind == SlotKind::region) {
                ++regions;
                continue;
            }
            if (!out.empty()) out += "|";
            out += s.kind == SlotKind::question ? "question" : "caption";
        }
        if (regions) out += (out.empty() ? "" : "|") + std::string("region x") + std::to_string(regions);
        return out;
    }
};

/// Question, then caption if present (early fusion), then the regions.
inline MultimodalInput assemble_multimodal_input(const std::string& question, const std::optional<std::string>& caption,
                                                 const RegionFeatureSet& regions, const MultimodalOptions& opts = {}) {
    if (regions.n_v() == 0) throw PreconditionError("multimodal input needs at least one region");
    if (regions.d_v() != opts.expected_d_v)
        throw ConfigError("region features have d_v " + std::to_string(regions.d_v()) + ", projection expects " +
                          std::to_string(opts.expected_d_v));
    if (opts.concat_boxes && !regions.boxes)
        throw ConfigError("box concatenation requested but image " + std::to_string(regions.image_id) + " has no boxes");

    MultimodalInput in;
    in.slots.push_back({SlotKind::question, question, 0});
    if (caption) in.slots.push_back({SlotKind::caption, *caption, 0});
    for (std::size_t i = 0; i < regions.n_v(); ++i) in.slots.push_back({SlotKind::region, {}, i});

    if (opts.concat_boxes) {
        in.region_inputs.resize(regions.features.rows(), regions.features.cols() + 4);
        in.region_inputs << regions.features, *regions.boxes;
    } else {
        in.region_inputs = regions.features;
    }
    return in;
}

} // namespace capvqa
