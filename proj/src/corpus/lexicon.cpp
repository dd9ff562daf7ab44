#include "prefalign/corpus/lexicon.hpp"

#include "prefalign/corpus/record.hpp"

namespace prefalign::corpus::lexicon {

namespace {

using sv = std::string_view;

const std::array<std::array<sv, 2>, 9> kComplaints = {{
    {"other guests got upgrades but we did not", "we were treated worse than other guests"},
    {"we did not get what we paid for", "it was not worth the price we paid"},
    {"the room did not meet our basic needs", "there was no crib for our baby"},
    {"it took hours to fix the shower", "nobody fixed the heater for two days"},
    {"they refused to change our checkout time", "the rigid policy would not allow a room swap"},
    {"no staff could be found at the desk", "we could not reach anyone by phone"},
    {"the clerk was rude to us", "the manager shouted at my wife"},
    {"staff made no effort to help", "nobody tried to solve the problem"},
    {"no one cared about our situation", "the staff ignored our concerns"},
}};

const std::array<std::array<sv, 2>, 8> kCueSentences = {{
    {"The delay was caused by a broken pump.", "This happened because our booking system failed."},
    {"We will refund your first night.", "Please accept a free dinner voucher."},
    {"Our policy lets guests request a new room at the desk.", "Please follow our complaint procedure at the front desk."},
    {"Our staff are trained to high standards.", "Our rooms were renovated last year."},
    {"We are truly sorry for this experience.", "Please accept our sincere apologies."},
    {"Thank you for staying with us.", "We appreciate your visit."},
    {"We understand how frustrating this was.", "Your comfort matters to us."},
    {"Please write to us again with any comments.", "We welcome your future feedback."},
}};

const std::array<std::array<sv, 2>, 8> kCueMarkers = {{
    {"caused by", "because"},
    {"refund", "voucher"},
    {"policy", "procedure"},
    {"trained", "renovated"},
    {"sorry", "apolog"},
    {"thank you for staying", "appreciate"},
    {"understand", "matters to us"},
    {"write to us", "future feedback"},
}};

const std::array<sv, 8> kFacts = {
    "Our pool is open until 10 pm.",
    "There are 2 smoke alarms in room 6.",
    "Breakfast is served from 7 am.",
    "Parking costs 15 dollars per night.",
    "The gym is on floor 3.",
    "Room 12 has a new air conditioner.",
    "Our front desk opens at 6 am.",
    "The shuttle leaves every 30 minutes.",
};

const std::array<sv, 4> kPosObjective = {"the room was clean", "the staff were friendly",
                                         "the breakfast had many choices", "the hotel is close to the beach"};
const std::array<sv, 4> kPosSubjective = {"we felt so relaxed", "it was a magical stay", "i loved every minute",
                                          "we had the best time"};
const std::array<sv, 2> kNegObjective = {"the parking was expensive", "the wifi was slow"};
const std::array<sv, 2> kNegSubjective = {"we felt a bit let down", "i was somewhat disappointed"};
const std::array<sv, 3> kTemplate = {"Thank you for your review.", "We hope to welcome you again soon.",
                                     "Your feedback is valuable to us."};
const std::array<sv, 8> kTailored = {
    "We are glad you enjoyed our clean rooms.",   "We are glad you enjoyed our friendly staff.",
    "We are glad you enjoyed our breakfast.",     "We are glad you enjoyed our beach location.",
    "We are glad you enjoyed a relaxing stay.",   "We are glad you enjoyed a magical stay.",
    "We are glad you enjoyed every minute here.", "We are glad you enjoyed the best time here."};
const std::array<sv, 4> kRude = {"you are lying", "never come back", "stop complaining", "your fault"};

}  // namespace

int cue_index(std::string_view name) {
  for (int i = 0; i < 8; ++i) {
    if (kCues[i] == name) return i;
  }
  return -1;
}

std::span<const sv> complaint_phrases(int attribute) { return kComplaints.at(attribute); }
std::span<const sv> cue_sentences(int cue) { return kCueSentences.at(cue); }
std::span<const sv> cue_markers(int cue) { return kCueMarkers.at(cue); }
std::span<const sv> facts() { return kFacts; }
std::span<const sv> positive_objective() { return kPosObjective; }
std::span<const sv> positive_subjective() { return kPosSubjective; }
std::span<const sv> negative_objective() { return kNegObjective; }
std::span<const sv> negative_subjective() { return kNegSubjective; }
std::span<const sv> template_sentences() { return kTemplate; }
std::span<const sv> tailored_sentences() { return kTailored; }
std::span<const sv> rude_markers() { return kRude; }

bool contains_any(std::string_view lower_text, std::span<const sv> phrases) {
  for (sv p : phrases) {
    if (lower_text.find(to_lower(p)) != sv::npos) return true;
  }
  return false;
}

std::array<bool, 8> detect_cues(std::string_view response) {
  const std::string low = to_lower(response);
  std::array<bool, 8> out{};
  for (int c = 0; c < 8; ++c) out[c] = contains_any(low, kCueMarkers[c]);
  return out;
}

std::string detect_style(std::string_view response) {
  return to_lower(response).find("glad you") != std::string::npos ? "tailored" : "template";
}

}  // namespace prefalign::corpus::lexicon
