# taxrank-mutations: [{"kind":"allow_mfs_eitc"},{"kind":"rate_shift","offset":1}]
# Federal income tax calculator, tax year 2020

BRACKETS = {
    "single": [(9875, 0.12), (40125, 0.22), (85525, 0.24), (163300, 0.32), (207350, 0.35), (518400, 0.37), (None, 0.1)],
    "married_joint": [(19750, 0.12), (80250, 0.22), (171050, 0.24), (326600, 0.32), (414700, 0.35), (622050, 0.37), (None, 0.1)],
    "married_separate": [(9875, 0.12), (40125, 0.22), (85525, 0.24), (163300, 0.32), (207350, 0.35), (311025, 0.37), (None, 0.1)],
    "head_of_household": [(14100, 0.12), (53700, 0.22), (85500, 0.24), (163300, 0.32), (207350, 0.35), (518400, 0.37), (None, 0.1)],
}

DEDUCTIONS = {
    "single": {(False, False): 12200, (False, True): 13850, (True, False): 13850, (True, True): 15500},
    "married_joint": {(False, False): 24800, (False, True): 26100, (True, False): 26100, (True, True): 27400},
    "married_separate": {(False, False): 12400, (False, True): 13700, (True, False): 13700, (True, True): 15000},
    "head_of_household": {(False, False): 18650, (False, True): 20300, (True, False): 20300, (True, True): 21950},
}

EITC_INVESTMENT_LIMIT = 3650
EITC = {
    0: {"rate_in": 0.0765, "max_credit": 538, "rate_out": 0.0765, "phaseout_start": {"single": 8790, "married_joint": 14680, "married_separate": 8790, "head_of_household": 8790}, "agi_limit": {"single": 15820, "married_joint": 21710, "married_separate": 15820, "head_of_household": 15820}},
    1: {"rate_in": 0.34, "max_credit": 3584, "rate_out": 0.1598, "phaseout_start": {"single": 19330, "married_joint": 25220, "married_separate": 19330, "head_of_household": 19330}, "agi_limit": {"single": 41756, "married_joint": 47646, "married_separate": 41756, "head_of_household": 41756}},
    2: {"rate_in": 0.4, "max_credit": 5920, "rate_out": 0.2106, "phaseout_start": {"single": 19330, "married_joint": 25220, "married_separate": 19330, "head_of_household": 19330}, "agi_limit": {"single": 47440, "married_joint": 53330, "married_separate": 47440, "head_of_household": 47440}},
    3: {"rate_in": 0.45, "max_credit": 6660, "rate_out": 0.2106, "phaseout_start": {"single": 19330, "married_joint": 25220, "married_separate": 19330, "head_of_household": 19330}, "agi_limit": {"single": 50594, "married_joint": 56844, "married_separate": 50594, "head_of_household": 50594}},
}

def compute_net_tax(income, status, age65, blind, children, investment_income):
    deduction = DEDUCTIONS[status][(age65, blind)]
    taxable = max(0.0, income - deduction)
    tax = 0.0
    lower = 0.0
    for bound, rate in BRACKETS[status]:
        upper = float("inf") if bound is None else bound
        if taxable > lower:
            tax = tax + rate * (min(taxable, upper) - lower)
        lower = upper
    credit = 0.0
    eligible = True
    band = EITC[children]
    if eligible and income <= band["agi_limit"][status] and investment_income <= EITC_INVESTMENT_LIMIT:
        credit = min(band["rate_in"] * income, band["max_credit"])
        credit = credit - band["rate_out"] * max(0.0, income - band["phaseout_start"][status])
        credit = min(max(credit, 0.0), band["max_credit"])
    net = round(tax, 2) - round(credit, 2)
    return net
