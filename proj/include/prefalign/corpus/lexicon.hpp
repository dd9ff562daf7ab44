#pragma once

#include <array>
#include <span>
#include <string>
#include <string_view>
#include <vector>

// Phrase banks shared by the synthetic corpus generator and the mock
// annotator, so that mock labels are recoverable from generated text.

namespace prefalign::corpus::lexicon {

/// Complaint attributes in question order: distributive (0-2), procedural
/// (3-5), interactional (6-8).
inline constexpr std::array<std::string_view, 9> kAttributes = {
    "equality", "equity", "need", "speed", "flexibility", "accessibility", "politeness", "effort", "empathy"};

/// Cue order: four rational cues, then four emotional cues.
inline constexpr std::array<std::string_view, 8> kCues = {
    "Explanation", "Redress", "Facilitation", "Reinforcement", "Apology", "Appreciation", "Attentiveness", "Encouragement"};
inline constexpr int kRationalCount = 4;

/// Index into kCues, or -1.
int cue_index(std::string_view name);

std::span<const std::string_view> complaint_phrases(int attribute);
std::span<const std::string_view> cue_sentences(int cue);
/// Lower-case substrings whose presence marks a cue in a response.
std::span<const std::string_view> cue_markers(int cue);

std::span<const std::string_view> facts();
std::span<const std::string_view> positive_objective();
std::span<const std::string_view> positive_subjective();
std::span<const std::string_view> negative_objective();
std::span<const std::string_view> negative_subjective();
std::span<const std::string_view> template_sentences();
/// "We are glad you enjoyed ..." completions keyed like positive_objective
/// followed by positive_subjective.
std::span<const std::string_view> tailored_sentences();
std::span<const std::string_view> rude_markers();

bool contains_any(std::string_view lower_text, std::span<const std::string_view> phrases);
/// Cue presence flags (size 8) detected from a response.
std::array<bool, 8> detect_cues(std::string_view response);
/// "tailored" when the response engages with review specifics, else "template".
std::string detect_style(std::string_view response);

}  // namespace prefalign::corpus::lexicon
