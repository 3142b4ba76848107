#include "taxrank/profile.hpp"

#include <cmath>

#include "taxrank/errors.hpp"

namespace taxrank {

void TaxpayerProfile::validate() const {
    if (!std::isfinite(income) || income < 0.0) {
        throw ValidationError("profile income must be finite and nonnegative");
    }
    if (!std::isfinite(investment_income) || investment_income < 0.0) {
        throw ValidationError("profile investment income must be finite and nonnegative");
    }
    if (qualifying_children < 0 || qualifying_children > 3) {
        throw ValidationError("qualifying children must be in 0..3");
    }
    status_code(status); // rejects out-of-range enum values from casts
}

FieldEdit FieldEdit::income(double value) {
    FieldEdit e;
    e.field = Field::Income;
    e.number = value;
    return e;
}

FieldEdit FieldEdit::filing_status(FilingStatus value) {
    FieldEdit e;
    e.field = Field::Status;
    e.status = value;
    return e;
}

FieldEdit FieldEdit::age_65(bool value) {
    FieldEdit e;
    e.field = Field::Age65;
    e.flag = value;
    return e;
}

FieldEdit FieldEdit::blind(bool value) {
    FieldEdit e;
    e.field = Field::Blind;
    e.flag = value;
    return e;
}

FieldEdit FieldEdit::children(int value) {
    FieldEdit e;
    e.field = Field::Children;
    e.count = value;
    return e;
}

FieldEdit FieldEdit::investment_income(double value) {
    FieldEdit e;
    e.field = Field::InvestmentIncome;
    e.number = value;
    return e;
}

TaxpayerProfile counterfactual(const TaxpayerProfile& base, const FieldEdit& edit) {
    TaxpayerProfile out = base;
    switch (edit.field) {
        case FieldEdit::Field::Income: out.income = edit.number; break;
        case FieldEdit::Field::Status: out.status = edit.status; break;
        case FieldEdit::Field::Age65: out.age_65_or_older = edit.flag; break;
        case FieldEdit::Field::Blind: out.blind = edit.flag; break;
        case FieldEdit::Field::Children: out.qualifying_children = edit.count; break;
        case FieldEdit::Field::InvestmentIncome: out.investment_income = edit.number; break;
    }
    out.validate();
    return out;
}

} // namespace taxrank
