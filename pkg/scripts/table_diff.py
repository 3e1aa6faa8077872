"""Print the derived flow table and its difference from the closed-form table for both sign conventions."""

from rgflow.symbolic import compare_tables, derive_flow_table, format_table, hardcoded_flow_table, numeric_cross_check


def main():
    for sign in (-1, 1):
        for phase in ("below_jab", "at_or_above_jab"):
            derived = derive_flow_table(phase, sign)
            cmp = compare_tables(derived, hardcoded_flow_table(phase), phase, sign)
            print(cmp.report())
            if sign == -1 and phase == "below_jab":
                print(format_table(derived))
            print(f"  derived vs flow.phi_pt: {numeric_cross_check(derived, phase):.3e}")


if __name__ == "__main__":
    main()
