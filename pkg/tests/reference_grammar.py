"""The ERC20 reference predicate set used by grammar-fidelity tests.

Ten primary predicates and twelve condition predicates; alternative indices
in the rendered grammar must come out as primary_*_0..9 and cond_*_0..11 in
this order.
"""

from __future__ import annotations

from specmine.grammar import Predicate, Sort

REFERENCE_SORTS = [
    Sort("Function", "A callable piece of code defined within a Solidity contract."),
    Sort("Interface", "A Solidity interface that declares function signatures without implementations."),
    Sort("Contract", "A Solidity contract."),
    Sort("Value", "A data element returned by a function."),
    Sort("Token", "An ERC-20 token instance."),
    Sort("Amount", "The numeric quantity of tokens to be transferred."),
    Sort("Address", "A blockchain address."),
    Sort("Event", "A blockchain event emitted by a contract."),
    Sort("TransferEvent", "The ERC-20 Transfer event."),
    Sort("Caller", "The account that initiates the transaction."),
    Sort("Balance", "The numeric balance of tokens held by an account."),
    Sort("InsufficientBalanceCondition", "True when an account's balance is below the transfer amount."),
    Sort("AuthorizationCondition", "True when the caller has been authorized by the owner account."),
    Sort("Policy", "A rule or requirement a contract may enforce."),
    Sort("AttackVector", "A known attack pattern."),
    Sort("UserInterfaceDesign", "A client user-interface design."),
]


def _p(name: str, primary: bool, params: list[tuple[str, str]], description: str) -> Predicate:
    return Predicate(name=name, description=description, primary=primary, parameters=tuple(params))


REFERENCE_PRIMARIES = [
    _p("ImprovesUsability", True, [("function", "Function")],
       "Indicates that the function can be used to improve usability."),
    _p("TransfersTokens", True,
       [("function", "Function"), ("token", "Token"), ("amount", "Amount"), ("address", "Address")],
       "Indicates that the function transfers the specified amount of tokens to the specified address."),
    _p("ThrowsOnInsufficientBalance", True,
       [("function", "Function"), ("condition", "InsufficientBalanceCondition")],
       "Indicates that the function throws an exception when the supplied insufficient-balance condition holds."),
    _p("ZeroTransferIsNormal", True, [("function", "Function")],
       "Indicates that a transfer with a zero value must be treated as a normal transfer."),
    _p("TransfersTokensFromTo", True,
       [("function", "Function"), ("token", "Token"), ("amount", "Amount"), ("from", "Address"), ("to", "Address")],
       "Indicates that the function transfers the specified amount of tokens from the source address to "
       "the destination address."),
    _p("ThrowsOnUnauthorized", True,
       [("function", "Function"), ("condition", "AuthorizationCondition")],
       "Indicates that the function throws an exception when the supplied AuthorizationCondition does not hold."),
    _p("RequiresAllowanceResetBeforeSetting", True, [("function", "Function"), ("spender", "Address")],
       "Indicates that the allowance must first be reset to 0 before setting a new value."),
    _p("DoesNotEnforcePolicyForLegacyContracts", True, [("contract", "Contract"), ("policy", "Policy")],
       "Indicates that the contract does not enforce the specified policy for legacy contracts."),
    _p("MintsTokens", True, [("function", "Function"), ("token", "Token"), ("amount", "Amount")],
       "Indicates that the function performs a minting operation."),
    _p("MustTriggerApprovalEvent", True, [("function", "Function"), ("event", "Event")],
       "Indicates that a successful call to the approve function must trigger the Approval event."),
]

REFERENCE_CONDITIONS = [
    _p("Optional", False, [("function", "Function")], "Indicates that the function is optional."),
    _p("DoesNotExpect", False, [("component", "Interface"), ("value", "Value")],
       "Indicates that a component does not expect the value to be present."),
    _p("Returns", False, [("function", "Function"), ("value", "Value")],
       "Indicates that a function returns a specific value."),
    _p("DoesNotExpectContract", False, [("component", "Contract"), ("value", "Value")],
       "Indicates that a contract does not expect a specific value to be present."),
    _p("OptionalValue", False, [("function", "Function"), ("value", "Value")],
       "Indicates that a particular return value of a function is optional."),
    _p("MustFireTransferEvent", False, [("function", "Function"), ("event", "TransferEvent")],
       "Indicates that the function must emit the ERC-20 Transfer event upon execution."),
    _p("InsufficientBalanceCondition", False,
       [("caller", "Caller"), ("balance", "Balance"), ("amount", "Amount")],
       "Evaluates to true when the caller's token balance is less than the requested transfer amount."),
    _p("RecommendsAllowanceResetBeforeSetting", False, [("function", "Function"), ("spender", "Address")],
       "Specifies that clients are recommended to reset the allowance to 0 before setting a new value."),
    _p("MitigatesAttackVector", False, [("function", "Function"), ("attack", "AttackVector")],
       "Links the allowance-reset requirement to the mitigation of a specific attack vector."),
    _p("RequiresClientUIDesignToResetAllowance", False,
       [("function", "Function"), ("design", "UserInterfaceDesign")],
       "Ensures that the user interface design includes an allowance reset step."),
    _p("AllowsBackwardCompatibilityWithLegacyContracts", False,
       [("contract", "Contract"), ("policy", "Policy")],
       "Indicates that the contract permits backward compatibility with legacy contracts."),
    _p("EmitsTransferEventWithZeroFrom", False, [("function", "Function"), ("event", "TransferEvent")],
       "Ensures that the emitted Transfer event has its _from field set to the zero address."),
]

REFERENCE_PREDICATES = REFERENCE_PRIMARIES + REFERENCE_CONDITIONS
