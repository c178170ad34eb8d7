@Test
@Timeout(5)
public void deeplyNestedDocumentIsRejected() {
    String doc = "[".repeat(100000) + "]".repeat(100000);
    assertThrows(YamlException.class, () -> new YamlLoader().load(doc));
}
