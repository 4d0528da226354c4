#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "mosaic/util/digest.hpp"
#include "mosaic/util/json.hpp"

namespace mosaic {

enum class ObservationModality { tensor, text, text_image, image };
std::string_view to_string(ObservationModality m);
std::optional<ObservationModality> observation_modality_from_string(std::string_view text);

struct Tensor {
  std::vector<std::int64_t> shape;
  std::vector<float> data;

  friend bool operator==(const Tensor&, const Tensor&) = default;
};

/// Row-major RGB frame, height x width x 3.
struct RgbImage {
  std::int64_t height = 0;
  std::int64_t width = 0;
  Bytes pixels;

  friend bool operator==(const RgbImage&, const RgbImage&) = default;
};

/// Paradigm-tagged observation. Exactly the members implied by `modality`
/// are populated:
///   tensor     -> tensor
///   text       -> text
///   text_image -> text and 1..max_image_history images (oldest first)
///   image      -> exactly one image
struct ObservationPayload {
  ObservationModality modality = ObservationModality::tensor;
  std::optional<Tensor> tensor;
  std::optional<std::string> text;
  std::vector<RgbImage> images;

  /// Empty when the populated members match the modality.
  std::optional<std::string> invariant_violation() const;

  Json to_json() const;
  /// Throws ValidationError on malformed documents.
  static ObservationPayload from_json(const Json& doc);
  /// SHA-256 of the canonical JSON form.
  std::string digest() const;

  friend bool operator==(const ObservationPayload&, const ObservationPayload&) = default;
};

}  // namespace mosaic
