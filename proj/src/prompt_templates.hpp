#pragma once

// Frozen prompt text for template version "prompt-v1". Any wording change
// must bump kTemplateVersion so stored explanations stay comparable.

#include <string_view>

namespace lassolens::templates {

inline constexpr std::string_view kInstruction =
    "I want you to act as a data analyst. You will receive a description of a tabular dataset and its "
    "attributes, followed by information about a subset of points that a user selected in a 2D projection "
    "of the data and about the remaining non-selected points. Explain in plain language what characterizes "
    "the selected points compared to the non-selected points.";

inline constexpr std::string_view kStatisticsEvidence =
    "The following tables contain precomputed summary statistics comparing the selected points with the "
    "non-selected points. Numerical attributes report minimum, maximum, mean, standard deviation and the "
    "Kolmogorov-Smirnov (KS) statistic; categorical attributes report category counts, shares and a KS "
    "statistic. A larger KS value means the attribute differs more between the two sets.";

inline constexpr std::string_view kSubsampleEvidence =
    "The following tables contain raw attribute values for a uniform random sample of {pct}% of the selected "
    "points and {pct}% of the non-selected points. Missing values are written as NA.";

inline constexpr std::string_view kFullEvidence =
    "The following tables contain raw attribute values for all selected points and all non-selected points. "
    "Missing values are written as NA.";

inline constexpr std::string_view kTask =
    "Task: explain how the selected points differ from the non-selected points, using only the provided "
    "attributes, without speculation. Only refer to the attributes listed above; do not introduce attributes, "
    "values or background facts that are not present in the provided data, and do not extrapolate beyond the "
    "selected points.";

inline constexpr std::string_view kFormat =
    "Response format: a short summary followed by 3-5 bullet points, under 200 words in total, with key terms "
    "in bold (**term**). Start every bullet with \"- \".";

}  // namespace lassolens::templates
