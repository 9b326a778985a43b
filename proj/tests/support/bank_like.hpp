#pragma once

#include "lassolens/dataset.hpp"

#include <string>

namespace lassolens::testing {

/// 100 deposit=yes rows followed by 500 deposit=no rows with hand-picked
/// side statistics: pdays mean 0.36 among the yes rows, every yes row has a
/// loan, housing=no is 57% vs 36.6%, duration 537 vs 223, balance 1804 vs 1280.
inline Dataset bank_like_dataset() {
    std::string csv = "age,duration,balance,pdays,loan,housing,deposit\n";
    for (int i = 0; i < 100; ++i) {
        const int pdays = i == 0 ? 135 : -1;
        const int duration = i % 2 ? 637 : 437;
        const int balance = i % 2 ? 2104 : 1504;
        csv += std::to_string(30 + i % 20) + "," + std::to_string(duration) + "," + std::to_string(balance) + "," +
               std::to_string(pdays) + ",yes," + (i < 57 ? "no" : "yes") + ",yes\n";
    }
    for (int i = 0; i < 500; ++i) {
        const int duration = i % 2 ? 273 : 173;
        const int balance = i % 2 ? 1480 : 1080;
        const int pdays = i % 5 == 0 ? 9 : -1;
        csv += std::to_string(30 + i % 20) + "," + std::to_string(duration) + "," + std::to_string(balance) + "," +
               std::to_string(pdays) + "," + (i % 5 == 1 ? "yes" : "no") + "," + (i < 183 ? "no" : "yes") + ",no\n";
    }
    const std::string context =
        "_domain: Clients of a bank contacted in a phone marketing campaign for term deposits.\n"
        "_label: deposit\n"
        "_kind.duration: numerical\n_kind.balance: numerical\n_kind.pdays: numerical\n_kind.age: numerical\n"
        "age: Age of the client in years\n"
        "duration: Duration of the last contact in seconds\n"
        "balance: Average yearly balance in euros\n"
        "pdays: Days since the client was last contacted in a previous campaign (-1 means never)\n"
        "loan: Whether the client has a personal loan\n"
        "housing: Whether the client has a housing loan\n"
        "deposit: Whether the client subscribed a term deposit\n";
    return parse_dataset(csv, context, "bank_like");
}

}  // namespace lassolens::testing
