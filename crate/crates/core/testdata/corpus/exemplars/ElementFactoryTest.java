@Test
public void rejectsIllegalElementName() {
    ElementFactory factory = new ElementFactory();
    assertThrows(IllegalArgumentException.class, () -> factory.createElement("bad name<>"));
}
