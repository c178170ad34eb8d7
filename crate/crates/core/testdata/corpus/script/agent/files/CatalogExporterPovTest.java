package com.example.catalog;

import static org.junit.jupiter.api.Assertions.assertTrue;

import org.junit.jupiter.api.Test;

public class CatalogExporterPovTest {
    @Test
    public void exportAcceptsIllegalElementName() {
        CatalogExporter exporter = new CatalogExporter();
        String xml = exporter.export(" bad name<> ");
        assertTrue(xml.contains("<bad name<>"), xml);
    }
}
