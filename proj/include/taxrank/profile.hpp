#pragma once

#include "taxrank/types.hpp"

namespace taxrank {

struct TaxpayerProfile {
    double income = 0.0;
    FilingStatus status = FilingStatus::Single;
    bool age_65_or_older = false;
    bool blind = false;
    int qualifying_children = 0; // 0..3
    double investment_income = 0.0;

    // Throws ValidationError on nonfinite/negative money or children outside 0..3.
    void validate() const;

    bool operator==(const TaxpayerProfile&) const = default;
};

// A single-field edit used to build counterfactual profiles.
struct FieldEdit {
    enum class Field { Income, Status, Age65, Blind, Children, InvestmentIncome };

    Field field = Field::Income;
    double number = 0.0;          // Income / InvestmentIncome
    FilingStatus status = FilingStatus::Single;
    bool flag = false;            // Age65 / Blind
    int count = 0;                // Children

    static FieldEdit income(double value);
    static FieldEdit filing_status(FilingStatus value);
    static FieldEdit age_65(bool value);
    static FieldEdit blind(bool value);
    static FieldEdit children(int value);
    static FieldEdit investment_income(double value);
};

// Returns a profile equal to `base` on every field except the edited one.
// Throws ValidationError if the edit breaks profile invariants.
TaxpayerProfile counterfactual(const TaxpayerProfile& base, const FieldEdit& edit);

} // namespace taxrank
