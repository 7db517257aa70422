import operator
from cerberus import Validator


class ExtendedValidator(Validator):
    """
    `cerberus.Validator` extended with cross-field comparison rules and the
    admissibility rules of the layered-medium model.
    """

    def _compare(self, other_fields, field, value, test, message):
        if isinstance(other_fields, str):
            other_fields = [other_fields]
        for other_field in other_fields:
            if other_field not in self.document:
                self._error(field, "Could not be checked against %s, not provided" % (other_field))
            elif not test(value, self.document[other_field]):
                self._error(field, "Must be %s '%s'" % (message, other_field))

    def _validate_less_than(self, other_fields, field, value):
        """
        Check that the field value is less than the value of the other field.

        The rule's arguments are validated against this schema:
        {'type': ['string', 'list']}
        """
        self._compare(other_fields, field, value, operator.lt, "less than")

    def _validate_less_than_equal(self, other_fields, field, value):
        """
        Check that the field value is less than or equal to the value of
        the other field.

        The rule's arguments are validated against this schema:
        {'type': ['string', 'list']}
        """
        self._compare(
            other_fields, field, value, operator.le, "less than or equal to")

    def _validate_greater_than(self, other_fields, field, value):
        """
        Check that the field value is greater than the value of the other field.

        The rule's arguments are validated against this schema:
        {'type': ['string', 'list']}
        """
        self._compare(other_fields, field, value, operator.gt, "greater than")

    def _validate_greater_than_equal(self, other_fields, field, value):
        """
        Check that the field value is greater than or equal to the value of
        the other field.

        The rule's arguments are validated against this schema:
        {'type': ['string', 'list']}
        """
        self._compare(
            other_fields, field, value, operator.ge, "greater than or equal to")

    def _validate_equal(self, other_fields, field, value):
        """
        Check that the field value is equal to the value of the other field.

        The rule's arguments are validated against this schema:
        {'type': ['string', 'list']}
        """
        self._compare(other_fields, field, value, operator.eq, "equal to")

    def _validate_not_equal(self, other_fields, field, value):
        """
        Check that the field value is not equal to the value of the other field.

        The rule's arguments are validated against this schema:
        {'type': ['string', 'list']}
        """
        self._compare(other_fields, field, value, operator.ne, "not equal to")

    def _validate_exclusive_max(self, bound, field, value):
        """
        Check that the field value, or every item of a list value, is
        strictly below the bound.

        The rule's arguments are validated against this schema:
        {'type': 'number'}
        """
        values = value if isinstance(value, list) else [value]
        if any(v >= bound for v in values):
            self._error(field, "Must be strictly less than %s" % bound)

    def _validate_exclusive_min(self, bound, field, value):
        """
        Check that the field value, or every item of a list value, is
        strictly above the bound.

        The rule's arguments are validated against this schema:
        {'type': 'number'}
        """
        values = value if isinstance(value, list) else [value]
        if any(v <= bound for v in values):
            self._error(field, "Must be strictly greater than %s" % bound)

    def _validate_propagating(self, fields, field, value):
        """
        Check that a transverse wavenumber magnitude stays below the
        evanescent bound, eps * c0**2 * kappa**2 < 1, using the largest
        scaling value found at the dotted root-document paths
        `[eps_fields, c0_field]`.

        The rule's arguments are validated against this schema:
        {'type': 'list', 'items': [{'type': ['string', 'list']}, {'type': 'string'}]}
        """
        eps_fields, c0_field = fields
        if isinstance(eps_fields, str):
            eps_fields = [eps_fields]
        found = [self._lookup_root(name) for name in eps_fields]
        c0 = self._lookup_root(c0_field)
        if any(eps is None for eps in found) or c0 is None:
            self._error(
                field, "Could not be checked against %s and %s, not provided"
                % (eps_fields, c0_field))
            return
        eps_values = []
        for eps in found:
            eps_values.extend(eps if isinstance(eps, list) else [eps])
        if not eps_values:
            return
        eps_max = max(eps_values)
        kappas = value if isinstance(value, list) else [value]
        for kappa in kappas:
            if eps_max * c0 ** 2 * kappa ** 2 >= 1:
                self._error(
                    field, "Evanescent channel |kappa|=%s for eps=%s, c0=%s"
                    % (kappa, eps_max, c0))

    def _lookup_root(self, dotted):
        doc = self.root_document
        for part in dotted.split('.'):
            if not isinstance(doc, dict) or part not in doc:
                return None
            doc = doc[part]
        return doc
