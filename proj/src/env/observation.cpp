#include "mosaic/observation.hpp"

#include <cmath>

#include "mosaic/util/errors.hpp"

namespace mosaic {

std::string_view to_string(ObservationModality m) {
  switch (m) {
    case ObservationModality::tensor: return "tensor";
    case ObservationModality::text: return "text";
    case ObservationModality::text_image: return "text_image";
    case ObservationModality::image: return "image";
  }
  return "?";
}

std::optional<ObservationModality> observation_modality_from_string(std::string_view text) {
  if (text == "tensor") return ObservationModality::tensor;
  if (text == "text") return ObservationModality::text;
  if (text == "text_image") return ObservationModality::text_image;
  if (text == "image") return ObservationModality::image;
  return std::nullopt;
}

std::optional<std::string> ObservationPayload::invariant_violation() const {
  const bool has_tensor = tensor.has_value();
  const bool has_text = text.has_value();
  const bool has_images = !images.empty();
  switch (modality) {
    case ObservationModality::tensor:
      if (!has_tensor || has_text || has_images) return "tensor modality carries only a tensor";
      break;
    case ObservationModality::text:
      if (has_tensor || !has_text || has_images) return "text modality carries only text";
      break;
    case ObservationModality::text_image:
      if (has_tensor || !has_text || !has_images) return "text_image modality carries text and images";
      break;
    case ObservationModality::image:
      if (has_tensor || has_text || images.size() != 1) return "image modality carries exactly one image";
      break;
  }
  if (tensor) {
    std::int64_t n = 1;
    for (auto d : tensor->shape) n *= d;
    if (n != static_cast<std::int64_t>(tensor->data.size())) return "tensor data does not match shape";
  }
  for (const auto& img : images) {
    if (img.height * img.width * 3 != static_cast<std::int64_t>(img.pixels.size())) {
      return "image pixels do not match shape";
    }
  }
  return std::nullopt;
}

Json ObservationPayload::to_json() const {
  Json doc{{"modality", std::string(to_string(modality))}};
  if (tensor) {
    doc["shape"] = tensor->shape;
    Json data = Json::array();
    for (float v : tensor->data) {
      // Integral values are written as integers so the encoding stays short.
      if (std::nearbyint(v) == v) {
        data.push_back(static_cast<std::int64_t>(v));
      } else {
        data.push_back(static_cast<double>(v));
      }
    }
    doc["data"] = std::move(data);
  }
  if (text) doc["text"] = *text;
  if (!images.empty()) {
    Json arr = Json::array();
    for (const auto& img : images) {
      arr.push_back(Json{{"shape", {img.height, img.width, 3}}, {"data", base64_encode(img.pixels)}});
    }
    doc["images"] = std::move(arr);
  }
  return doc;
}

ObservationPayload ObservationPayload::from_json(const Json& doc) {
  if (!doc.is_object()) throw ValidationError("observation", "must be an object");
  ObservationPayload obs;
  auto modality = doc.contains("modality") && doc["modality"].is_string()
                      ? observation_modality_from_string(doc["modality"].get<std::string>())
                      : std::nullopt;
  if (!modality) throw ValidationError("observation.modality", "unknown modality");
  obs.modality = *modality;
  try {
    if (doc.contains("data")) {
      Tensor t;
      t.shape = doc.at("shape").get<std::vector<std::int64_t>>();
      t.data = doc.at("data").get<std::vector<float>>();
      obs.tensor = std::move(t);
    }
    if (doc.contains("text")) obs.text = doc.at("text").get<std::string>();
    if (doc.contains("images")) {
      for (const auto& img : doc.at("images")) {
        auto shape = img.at("shape").get<std::vector<std::int64_t>>();
        auto pixels = base64_decode(img.at("data").get<std::string>());
        if (shape.size() != 3 || shape[2] != 3 || !pixels) {
          throw ValidationError("observation.images", "malformed image");
        }
        obs.images.push_back(RgbImage{shape[0], shape[1], std::move(*pixels)});
      }
    }
  } catch (const Json::exception& e) {
    throw ValidationError("observation", e.what());
  }
  if (auto why = obs.invariant_violation()) throw ValidationError("observation", *why);
  return obs;
}

std::string ObservationPayload::digest() const { return sha256_hex(canonical_dump(to_json())); }

}  // namespace mosaic
