# Constants for tax brackets and rates for 2020
BRACKETS = {
    "single": [(9875, 0.1), (40125, 0.12), (85525, 0.22), (163300, 0.24), (207350, 0.32), (518400, 0.35), (None, 0.37)],
    "married_joint": [(19750, 0.1), (80250, 0.12), (171050, 0.22), (326600, 0.24), (414700, 0.32), (622050, 0.35), (None, 0.37)],
    "married_separate": [(9875, 0.1), (40125, 0.12), (85525, 0.22), (163300, 0.24), (207350, 0.32), (311025, 0.35), (None, 0.37)],
    "head_of_household": [(14100, 0.1), (53700, 0.12), (85500, 0.22), (163300, 0.24), (207350, 0.32), (518400, 0.35), (None, 0.37)],
}

# Deduction amounts based on filing status, age, and blindness for 2020
DEDUCTIONS = {
    "single": {(False, False): 12200, (True, False): 13850, (False, True): 13850, (True, True): 15500},
    "married_joint": {(False, False): 24800, (True, False): 26100, (False, True): 26100, (True, True): 27400},
    "married_separate": {(False, False): 12400, (True, False): 13700, (False, True): 13700, (True, True): 15000},
    "head_of_household": {(False, False): 18650, (True, False): 20300, (False, True): 20300, (True, True): 21950},
}


def compute_net_tax(income, status, age65, blind):
    deduction = DEDUCTIONS[status][(age65, blind)]
    taxable = max(0.0, income - deduction)
    tax = 0.0
    lower = 0.0
    for bound, rate in BRACKETS[status]:
        upper = float("inf") if bound is None else bound
        if taxable > lower:
            tax = tax + rate * (min(taxable, upper) - lower)
        lower = upper
    return round(tax, 2)
